#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "wavegas/error.hpp"
#include "wavegas/stats.hpp"
#include "wavegas/trainers.hpp"

namespace wavegas::bench {

// ---------------------------------------------------------------------------
// Run CSV
// ---------------------------------------------------------------------------

struct CsvRow {
  std::string method;
  std::string dataset;
  std::uint64_t seed = 0;
  std::size_t iters = 1;
  std::size_t partitions = 1;
  std::size_t batch_parts = 1;
  double best_val_acc = 0.0;
  double test_acc = 0.0;
  double wall_time_s = 0.0;
  std::vector<double> final_staleness;

  // "wavegas(I=3)" for iterated methods, the method name otherwise.
  std::string label() const {
    if (method == "wavegas" || method == "gradas") return method + "(I=" + std::to_string(iters) + ")";
    return method;
  }
};

inline const char* csv_header() {
  return "method,dataset,seed,I,P,batch_parts,best_val_acc,test_acc,wall_time_s,final_staleness_per_layer";
}

inline CsvRow to_row(const RunRecord& r) {
  return {r.method,        r.dataset,  r.seed,     r.iters,       r.partitions,
          r.batch_parts,   r.best_val_acc, r.test_acc, r.wall_time_s, r.final_staleness};
}

namespace detail {

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string general(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

template <typename T>
T parse_number(const std::string& s, const std::string& where) {
  std::istringstream in(s);
  T v{};
  in >> v;
  if (!in || !in.eof()) throw LoadError(where + ": cannot parse '" + s + "'");
  return v;
}

}  // namespace detail

inline std::string format_row(const CsvRow& r) {
  wavegas::detail::require(r.dataset.find_first_of(",\n") == std::string::npos,
                           "dataset name '", r.dataset, "' cannot be written to CSV");
  std::string stale;
  for (std::size_t i = 0; i < r.final_staleness.size(); ++i) {
    if (i) stale += ';';
    stale += detail::general(r.final_staleness[i]);
  }
  std::ostringstream out;
  out << r.method << ',' << r.dataset << ',' << r.seed << ',' << r.iters << ',' << r.partitions << ','
      << r.batch_parts << ',' << detail::fixed(r.best_val_acc, 6) << ',' << detail::fixed(r.test_acc, 6)
      << ',' << detail::fixed(r.wall_time_s, 4) << ',' << stale;
  return out.str();
}

inline std::vector<CsvRow> parse_csv(std::istream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line) || line != csv_header())
    throw LoadError(name + ": missing or unexpected header");
  std::vector<CsvRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(lineno);
    const auto f = detail::split(line, ',');
    if (f.size() != 10) throw LoadError(where + ": expected 10 fields, got " + std::to_string(f.size()));
    CsvRow r;
    r.method = f[0];
    r.dataset = f[1];
    r.seed = detail::parse_number<std::uint64_t>(f[2], where);
    r.iters = detail::parse_number<std::size_t>(f[3], where);
    r.partitions = detail::parse_number<std::size_t>(f[4], where);
    r.batch_parts = detail::parse_number<std::size_t>(f[5], where);
    r.best_val_acc = detail::parse_number<double>(f[6], where);
    r.test_acc = detail::parse_number<double>(f[7], where);
    r.wall_time_s = detail::parse_number<double>(f[8], where);
    if (!f[9].empty())
      for (const auto& s : detail::split(f[9], ';')) r.final_staleness.push_back(detail::parse_number<double>(s, where));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<CsvRow> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  return parse_csv(in, path.string());
}

// Appends rows, writing the header first when the file is new or empty.
inline void append_csv(const std::filesystem::path& path, const std::vector<CsvRow>& rows) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw LoadError("cannot write " + path.string());
  if (fresh) out << csv_header() << '\n';
  for (const auto& r : rows) out << format_row(r) << '\n';
}

inline void write_staleness_csv(std::ostream& out, const RunRecord& r, bool header) {
  if (header) out << "method,dataset,seed,I,epoch,sweep,layer,max,mean\n";
  for (const auto& s : r.staleness_trace)
    out << r.method << ',' << r.dataset << ',' << r.seed << ',' << r.iters << ',' << s.epoch << ','
        << s.sweep << ',' << s.layer << ',' << detail::general(s.max) << ',' << detail::general(s.mean)
        << '\n';
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

struct MeanStd {
  double mean = 0.0;
  std::optional<double> std;  // sample deviation, needs n >= 2
  std::size_t n = 0;

  std::string str(double scale = 100.0, int digits = 2) const {
    std::string s = detail::fixed(mean * scale, digits);
    if (std) s += " ± " + detail::fixed(*std * scale, digits);
    return s;
  }
};

inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd m;
  m.n = v.size();
  if (v.empty()) return m;
  double s = 0.0;
  for (double x : v) s += x;
  m.mean = s / static_cast<double>(v.size());
  if (v.size() >= 2) {
    double sq = 0.0;
    for (double x : v) sq += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(sq / static_cast<double>(v.size() - 1));
  }
  return m;
}

struct SweepEntry {
  std::size_t iters = 1;
  MeanStd val;
  MeanStd test;
  MeanStd time;
};

struct SweepSummary {
  std::string dataset;
  std::vector<SweepEntry> entries;  // ascending I
  std::size_t best_iters = 1;       // argmax of mean validation accuracy, smallest I on ties
  MeanStd best_test;
  std::optional<double> avg_test_2_6;  // mean of the I = 2..6 test means, when all five are present
};

// Groups rows of one dataset by I.
inline SweepSummary summarize_sweep(const std::vector<CsvRow>& rows) {
  wavegas::detail::require(!rows.empty(), "summarize_sweep: no rows");
  SweepSummary s;
  s.dataset = rows.front().dataset;
  std::map<std::size_t, std::vector<const CsvRow*>> by_iter;
  for (const auto& r : rows) {
    wavegas::detail::require(r.dataset == s.dataset, "summarize_sweep: rows mix datasets '", s.dataset,
                             "' and '", r.dataset, "'");
    by_iter[r.iters].push_back(&r);
  }
  for (const auto& [iters, group] : by_iter) {
    std::vector<double> val, test, time;
    for (const auto* r : group) {
      val.push_back(r->best_val_acc);
      test.push_back(r->test_acc);
      time.push_back(r->wall_time_s);
    }
    s.entries.push_back({iters, mean_std(val), mean_std(test), mean_std(time)});
  }
  const SweepEntry* best = &s.entries.front();
  for (const auto& e : s.entries)
    if (e.val.mean > best->val.mean) best = &e;
  s.best_iters = best->iters;
  s.best_test = best->test;

  double sum = 0.0;
  std::size_t found = 0;
  for (const auto& e : s.entries)
    if (e.iters >= 2 && e.iters <= 6) {
      sum += e.test.mean;
      ++found;
    }
  if (found == 5) s.avg_test_2_6 = sum / 5.0;
  return s;
}

inline std::string format_sweep(const SweepSummary& s) {
  std::ostringstream out;
  out << "dataset " << s.dataset << '\n';
  out << "I    runs  val acc         test acc        time (s)\n";
  for (const auto& e : s.entries) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-4zu %-5zu %-15s %-15s %s\n", e.iters, e.val.n, e.val.str().c_str(),
                  e.test.str().c_str(), e.time.str(1.0, 3).c_str());
    out << buf;
  }
  out << "best I by validation: " << s.best_iters << " (test " << s.best_test.str() << ")\n";
  if (s.avg_test_2_6) out << "avg test over I=2..6: " << detail::fixed(*s.avg_test_2_6 * 100.0, 2) << '\n';
  return out.str();
}

// Plot data: one line per I.
inline std::string format_sweep_csv(const SweepSummary& s) {
  std::ostringstream out;
  out << "dataset,I,runs,val_mean,val_std,test_mean,test_std,time_mean\n";
  for (const auto& e : s.entries)
    out << s.dataset << ',' << e.iters << ',' << e.val.n << ',' << detail::fixed(e.val.mean, 6) << ','
        << (e.val.std ? detail::fixed(*e.val.std, 6) : "") << ',' << detail::fixed(e.test.mean, 6) << ','
        << (e.test.std ? detail::fixed(*e.test.std, 6) : "") << ',' << detail::fixed(e.time.mean, 4) << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

inline constexpr const char* kBestIterLabel = "wavegas(best I)";
inline constexpr const char* kAvgIterLabel = "wavegas(avg I=2..6)";

struct WilcoxonLine {
  std::string label;
  WilcoxonResult result;
};

struct Report {
  std::vector<std::string> datasets;
  std::vector<std::string> labels;  // column order
  std::string baseline;             // "gas" when present, else the first column
  std::map<std::pair<std::string, std::string>, MeanStd> accuracy;  // (dataset, label)
  std::map<std::pair<std::string, std::string>, MeanStd> time;
  std::map<std::string, double> delta;  // mean over datasets of (label - baseline)
  std::vector<WilcoxonLine> wilcoxon;   // label vs baseline, over datasets
};

// Datasets of every file must agree; the message lists what each file lacks.
inline void check_same_datasets(const std::vector<std::pair<std::string, std::vector<CsvRow>>>& files) {
  std::set<std::string> all;
  std::vector<std::set<std::string>> per_file;
  for (const auto& [name, rows] : files) {
    std::set<std::string> s;
    for (const auto& r : rows) s.insert(r.dataset);
    all.insert(s.begin(), s.end());
    per_file.push_back(std::move(s));
  }
  std::string msg;
  for (std::size_t i = 0; i < files.size(); ++i) {
    std::string missing;
    for (const auto& d : all)
      if (!per_file[i].count(d)) missing += (missing.empty() ? "" : ", ") + d;
    if (!missing.empty()) msg += "\n  " + files[i].first + " lacks: " + missing;
  }
  if (!msg.empty()) wavegas::detail::fail("dataset sets differ across CSVs:", msg);
}

inline Report build_report(const std::vector<std::pair<std::string, std::vector<CsvRow>>>& files) {
  check_same_datasets(files);
  Report rep;
  std::map<std::string, std::vector<CsvRow>> by_dataset;
  std::set<std::string> label_set;
  for (const auto& [name, rows] : files)
    for (const auto& r : rows) {
      by_dataset[r.dataset].push_back(r);
      label_set.insert(r.label());
    }
  wavegas::detail::require(!by_dataset.empty(), "report: no rows");
  for (const auto& [d, rows] : by_dataset) rep.datasets.push_back(d);

  // Fixed method order, then I ascending within a method.
  auto rank = [](const std::string& l) {
    for (int i = 0; const char* m : {"full", "gas", "wavegas", "gradas"}) {
      if (l.rfind(m, 0) == 0 && (l.size() == std::string(m).size() || l[std::string(m).size()] == '('))
        return i;
      ++i;
    }
    return 4;
  };
  std::vector<std::string> labels(label_set.begin(), label_set.end());
  std::stable_sort(labels.begin(), labels.end(), [&](const std::string& a, const std::string& b) {
    if (rank(a) != rank(b)) return rank(a) < rank(b);
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  });

  std::set<std::string> wave_datasets;
  for (const auto& [d, rows] : by_dataset) {
    std::map<std::string, std::vector<double>> acc, secs;
    std::vector<CsvRow> wave;
    for (const auto& r : rows) {
      acc[r.label()].push_back(r.test_acc);
      secs[r.label()].push_back(r.wall_time_s);
      if (r.method == "wavegas") wave.push_back(r);
    }
    for (const auto& [l, v] : acc) {
      rep.accuracy[{d, l}] = mean_std(v);
      rep.time[{d, l}] = mean_std(secs[l]);
    }
    std::set<std::size_t> iters;
    for (const auto& r : wave) iters.insert(r.iters);
    if (iters.size() >= 2) {
      const auto sweep = summarize_sweep(wave);
      rep.accuracy[{d, kBestIterLabel}] = sweep.best_test;
      if (sweep.avg_test_2_6) rep.accuracy[{d, kAvgIterLabel}] = MeanStd{*sweep.avg_test_2_6, {}, 5};
      wave_datasets.insert(d);
    }
  }
  rep.labels = labels;
  if (!wave_datasets.empty()) {
    rep.labels.push_back(kBestIterLabel);
    bool any_avg = false;
    for (const auto& d : rep.datasets) any_avg |= rep.accuracy.count({d, kAvgIterLabel}) > 0;
    if (any_avg) rep.labels.push_back(kAvgIterLabel);
  }
  rep.baseline = label_set.count("gas") ? "gas" : rep.labels.front();

  for (const auto& l : rep.labels) {
    double sum = 0.0;
    std::size_t n = 0;
    std::vector<PairedValue> pairs;
    for (const auto& d : rep.datasets) {
      const auto a = rep.accuracy.find({d, l});
      const auto b = rep.accuracy.find({d, rep.baseline});
      if (a == rep.accuracy.end() || b == rep.accuracy.end()) continue;
      sum += a->second.mean - b->second.mean;
      ++n;
      pairs.push_back({a->second.mean, b->second.mean});
    }
    rep.delta[l] = n ? sum / static_cast<double>(n) : 0.0;
    if (l != rep.baseline && !pairs.empty()) rep.wilcoxon.push_back({l, wilcoxon_one_sided(pairs)});
  }
  return rep;
}

inline std::string format_report(const Report& rep) {
  std::ostringstream out;
  std::size_t w0 = 12;
  for (const auto& d : rep.datasets) w0 = std::max(w0, d.size() + 2);
  std::size_t w = 16;
  for (const auto& l : rep.labels) w = std::max(w, l.size() + 2);
  auto pad = [](std::string s, std::size_t n) {
    if (s.size() < n) s.append(n - s.size(), ' ');
    return s;
  };
  auto header = [&](const char* title) {
    out << title << '\n' << pad("dataset", w0);
    for (const auto& l : rep.labels) out << pad(l, w);
    out << '\n';
  };

  header("test accuracy (%, mean ± std over runs)");
  for (const auto& d : rep.datasets) {
    out << pad(d, w0);
    for (const auto& l : rep.labels) {
      const auto it = rep.accuracy.find({d, l});
      out << pad(it == rep.accuracy.end() ? "-" : it->second.str(), w);
    }
    out << '\n';
  }
  out << pad("Δ mean acc", w0);
  for (const auto& l : rep.labels) {
    const double v = rep.delta.at(l) * 100.0;
    out << pad((v >= 0 ? "+" : "") + detail::fixed(v, 2), w);
  }
  out << "\n(Δ relative to " << rep.baseline << ")\n\n";

  header("training time (s, mean ± std over runs)");
  for (const auto& d : rep.datasets) {
    out << pad(d, w0);
    for (const auto& l : rep.labels) {
      const auto it = rep.time.find({d, l});
      out << pad(it == rep.time.end() ? "-" : it->second.str(1.0, 3), w);
    }
    out << '\n';
  }

  if (!rep.wilcoxon.empty()) {
    out << "\none-sided Wilcoxon signed-rank vs " << rep.baseline << " (per-dataset means)\n";
    for (const auto& [label, r] : rep.wilcoxon)
      out << pad(label, w) << "n=" << r.n << " W+=" << detail::general(r.w_plus)
          << " p=" << detail::fixed(r.p_value, 4) << '\n';
  }
  return out.str();
}

// Per-dataset mean test accuracy of two result sets, paired by dataset.
inline WilcoxonResult compare_csvs(const std::vector<CsvRow>& a, const std::vector<CsvRow>& b,
                                   const std::string& name_a = "a", const std::string& name_b = "b") {
  check_same_datasets({{name_a, a}, {name_b, b}});
  auto means = [](const std::vector<CsvRow>& rows) {
    std::map<std::string, std::vector<double>> acc;
    for (const auto& r : rows) acc[r.dataset].push_back(r.test_acc);
    std::map<std::string, double> out;
    for (const auto& [d, v] : acc) out[d] = mean_std(v).mean;
    return out;
  };
  const auto ma = means(a), mb = means(b);
  std::vector<PairedValue> pairs;
  for (const auto& [d, v] : ma) pairs.push_back({v, mb.at(d)});
  wavegas::detail::require(!pairs.empty(), "compare_csvs: no rows");
  return wilcoxon_one_sided(pairs);
}

}  // namespace wavegas::bench
