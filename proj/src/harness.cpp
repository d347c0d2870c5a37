#include "iopathtune/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>

namespace iopathtune {

namespace {

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

std::string decision_label(const ActionDecision& d) { return std::string(decision_kind(d)); }

void append_decision_fields(std::string& out, const ActionDecision& d) {
  if (const auto* a = std::get_if<Apply>(&d)) {
    out += std::string(to_string(a->action.param)) + "," + std::to_string(a->action.pre_value) + "," +
           std::to_string(a->action.post_value);
  } else if (const auto* r = std::get_if<Revert>(&d)) {
    out += std::string(to_string(r->param)) + "," + std::to_string(r->replaced_value) + "," +
           std::to_string(r->restored_value);
  } else {
    out += ",,";
  }
}

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::vector<DecisionRow> decision_log(const SimResult& result) {
  std::vector<DecisionRow> rows;
  std::size_t turns = 0;
  for (const auto& c : result.clients) turns = std::max(turns, c.turns.size());
  for (std::size_t t = 0; t < turns; ++t) {
    for (const auto& c : result.clients) {
      if (t < c.turns.size()) rows.push_back({c.id, c.turns[t].turn, c.turns[t].decision});
    }
  }
  return rows;
}

std::string decisions_csv(const std::vector<DecisionRow>& rows) {
  std::string out = "client_id,turn,decision,param,old,new\n";
  for (const DecisionRow& r : rows) {
    out += r.client_id + "," + std::to_string(r.turn) + "," + decision_label(r.decision) + ",";
    append_decision_fields(out, r.decision);
    out += "\n";
  }
  return out;
}

std::string timeseries_csv(const SimResult& result) {
  std::string out =
      "time_s,client_id,mppr,mrif,dirty_bytes,page_cache_rate,rpc_gen_rate,transfer_bw_mbps,decision\n";
  std::size_t turns = 0;
  for (const auto& c : result.clients) turns = std::max(turns, c.turns.size());
  for (std::size_t t = 0; t < turns; ++t) {
    for (const auto& c : result.clients) {
      if (t >= c.turns.size()) continue;
      const TurnRecord& r = c.turns[t];
      out += fmt("%.3f", r.time_s) + "," + c.id + "," + std::to_string(r.params.max_pages_per_rpc) + "," +
             std::to_string(r.params.max_rpcs_in_flight) + "," + fmt("%.0f", r.window.dirty_bytes) + "," +
             fmt("%.3f", r.window.page_cache_rate) + "," + fmt("%.3f", r.window.rpc_gen_rate) + "," +
             fmt("%.6f", to_mbps(r.window.transfer_bw)) + "," + decision_label(r.decision) + "\n";
    }
  }
  return out;
}

std::string summary_csv(const Scenario& scenario, const SimResult& result) {
  std::string out = "client_id,phase,start_s,end_s,mean_bw_mbps,steady_bw_mbps\n";
  auto row = [&](const std::string& id, const std::string& phase, double s, double e, double mean,
                 double steady) {
    out += id + "," + phase + "," + fmt("%.3f", s) + "," + fmt("%.3f", e) + "," + fmt("%.6f", to_mbps(mean)) +
           "," + fmt("%.6f", to_mbps(steady)) + "\n";
  };
  const double end = result.duration_s;
  for (std::size_t i = 0; i < result.clients.size(); ++i) {
    const ClientResult& c = result.clients[i];
    for (const PhaseSummary& p : c.phases)
      row(c.id, std::to_string(p.index), p.start_s, p.end_s, p.mean_bw, p.steady_bw);
    row(c.id, "all", 0, end, result.client_bw(i, 0, end), result.client_bw(i, end / 2, end));
  }

  bool shared = true;
  for (const ClientSpec& c : scenario.clients) {
    if (c.schedule.phases.size() != scenario.clients.front().schedule.phases.size()) shared = false;
    else
      for (std::size_t p = 0; p < c.schedule.phases.size(); ++p)
        if (c.schedule.phases[p].start_s != scenario.clients.front().schedule.phases[p].start_s) shared = false;
  }
  if (shared) {
    const auto starts = phase_starts(scenario);
    for (std::size_t p = 0; p < starts.size(); ++p) {
      const double s = starts[p];
      const double e = p + 1 < starts.size() ? starts[p + 1] : end;
      row("total", std::to_string(p), s, e, result.total_bw(s, e), result.total_bw(s + (e - s) / 2, e));
    }
  }
  row("total", "all", 0, end, result.total_bw(0, end), result.total_bw(end / 2, end));
  return out;
}

std::string snapshot_trace(const SimResult& result) {
  std::string out;
  std::size_t n = 0;
  for (const auto& c : result.clients) n = std::max(n, c.snapshots.size());
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& c : result.clients)
      if (i < c.snapshots.size()) out += serialize_snapshot(c.snapshots[i]);
  return out;
}

std::string sweep_csv(const SweepResult& sweep) {
  std::string out = "mppr,mrif,mean_bw_mbps\n";
  for (const SweepPoint& p : sweep.points) {
    out += std::to_string(p.params.max_pages_per_rpc) + "," + std::to_string(p.params.max_rpcs_in_flight) +
           "," + fmt("%.6f", to_mbps(p.mean_bw)) + "\n";
  }
  const SweepPoint& best = sweep.best();
  out += "# argmax: mppr=" + std::to_string(best.params.max_pages_per_rpc) +
         " mrif=" + std::to_string(best.params.max_rpcs_in_flight) +
         " mean_bw_mbps=" + fmt("%.6f", to_mbps(best.mean_bw)) + "\n";
  return out;
}

std::vector<DecisionRow> replay_trace(std::string_view trace_text, const TunerConfig& cfg) {
  std::vector<Snapshot> snaps;
  try {
    snaps = parse_trace(trace_text);
  } catch (const SnapshotParseError& e) {
    throw ReplayError(e.line(), e.what());
  }

  // Record start lines so window errors can point into the trace.
  std::vector<int> lines;
  {
    int number = 0;
    bool in_record = false;
    std::size_t pos = 0;
    while (pos < trace_text.size()) {
      const auto nl = trace_text.find('\n', pos);
      const auto end = nl == std::string_view::npos ? trace_text.size() : nl;
      std::string_view line = trace_text.substr(pos, end - pos);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      ++number;
      if (line.empty()) in_record = false;
      else if (!in_record) {
        in_record = true;
        lines.push_back(number);
      }
      pos = end + 1;
    }
  }

  struct PerClient {
    std::string id;
    std::optional<Tuner> tuner;
    std::optional<Snapshot> prev;
    std::vector<DecisionRow> rows;
  };
  std::vector<PerClient> clients;
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    const Snapshot& s = snaps[i];
    auto it = std::find_if(clients.begin(), clients.end(), [&](const PerClient& c) { return c.id == s.client_id; });
    if (it == clients.end()) {
      clients.push_back(PerClient{s.client_id, std::nullopt, std::nullopt, {}});
      it = std::prev(clients.end());
      try {
        it->tuner.emplace(cfg, s.params());
      } catch (const ConfigError& e) {
        throw ReplayError(lines.at(i), "line " + std::to_string(lines.at(i)) + ": " + e.what());
      }
    }
    if (it->prev) {
      WindowMetrics w;
      try {
        w = derive_window(*it->prev, s);
      } catch (const WindowError& e) {
        throw ReplayError(lines.at(i), "line " + std::to_string(lines.at(i)) + ": " + e.what());
      }
      const ActionDecision d = it->tuner->observe(w);
      it->rows.push_back({it->id, it->tuner->state().turn, d});
    }
    it->prev = s;
  }

  std::vector<DecisionRow> out;
  std::size_t turns = 0;
  for (const auto& c : clients) turns = std::max(turns, c.rows.size());
  for (std::size_t t = 0; t < turns; ++t)
    for (const auto& c : clients)
      if (t < c.rows.size()) out.push_back(c.rows[t]);
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::system_error(std::make_error_code(std::errc::io_error), "cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw std::system_error(std::make_error_code(std::errc::io_error), "cannot write " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::system_error(std::make_error_code(std::errc::no_such_file_or_directory),
                            "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// --- report ----------------------------------------------------------------

namespace {

struct Series {
  std::string id;
  std::vector<double> t, bw, mppr, mrif;
};

struct SummaryRow {
  std::string id, phase;
  double mean = 0, steady = 0;
};

std::vector<Series> load_timeseries(const std::filesystem::path& dir) {
  std::istringstream in(read_file(dir / "timeseries.csv"));
  std::string line;
  std::getline(in, line);
  std::vector<Series> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 9)
      throw std::system_error(std::make_error_code(std::errc::invalid_argument),
                              "malformed timeseries.csv row: " + line);
    auto it = std::find_if(out.begin(), out.end(), [&](const Series& s) { return s.id == f[1]; });
    if (it == out.end()) {
      out.push_back(Series{f[1], {}, {}, {}, {}});
      it = std::prev(out.end());
    }
    it->t.push_back(std::stod(f[0]));
    it->mppr.push_back(std::stod(f[2]));
    it->mrif.push_back(std::stod(f[3]));
    it->bw.push_back(std::stod(f[7]));
  }
  return out;
}

std::vector<SummaryRow> load_summary(const std::filesystem::path& dir) {
  std::istringstream in(read_file(dir / "summary.csv"));
  std::string line;
  std::getline(in, line);
  std::vector<SummaryRow> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 6)
      throw std::system_error(std::make_error_code(std::errc::invalid_argument),
                              "malformed summary.csv row: " + line);
    out.push_back({f[0], f[1], std::stod(f[4]), std::stod(f[5])});
  }
  return out;
}

struct TotalsRow {
  std::string id;
  double baseline = 0, tuned = 0;
};

std::vector<TotalsRow> totals(const std::vector<SummaryRow>& tuned, const std::vector<SummaryRow>& base) {
  std::vector<TotalsRow> rows;
  for (const SummaryRow& t : tuned) {
    if (t.phase != "all") continue;
    for (const SummaryRow& b : base)
      if (b.phase == "all" && b.id == t.id) rows.push_back({t.id, b.mean, t.mean});
  }
  return rows;
}

std::string improvement(double base, double tuned) {
  if (base <= 0) return "n/a";
  return fmt("%+.2f%%", (tuned / base - 1.0) * 100.0);
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2"};

std::string svg_report(const std::vector<Series>& series, const std::vector<TotalsRow>& rows) {
  const double w = 900, panel_h = 220, left = 70, right = 20, top = 40, gap = 60;
  double t_max = 1, bw_max = 1;
  for (const Series& s : series) {
    for (double t : s.t) t_max = std::max(t_max, t);
    for (double b : s.bw) bw_max = std::max(bw_max, b);
  }
  const double plot_w = w - left - right;
  const double height = top + 3 * (panel_h + gap) + 30.0 * static_cast<double>(rows.size() + 2);
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  struct Panel {
    const char* title;
    double y0;
    double lo, hi;
    bool log2;
    std::vector<double> Series::*field;
  };
  const Panel panels[] = {
      {"transfer bandwidth (MB/s)", top, 0, bw_max, false, &Series::bw},
      {"max_pages_per_rpc (log2)", top + panel_h + gap, 4, 12, true, &Series::mppr},
      {"max_rpcs_in_flight (log2)", top + 2 * (panel_h + gap), 0, 8, true, &Series::mrif},
  };
  for (const Panel& p : panels) {
    o << "<text x=\"" << left << "\" y=\"" << p.y0 - 8 << "\" font-weight=\"bold\">" << p.title << "</text>\n";
    o << "<rect x=\"" << left << "\" y=\"" << p.y0 << "\" width=\"" << plot_w << "\" height=\"" << panel_h
      << "\" fill=\"none\" stroke=\"#999\"/>\n";
    o << "<text x=\"" << left - 6 << "\" y=\"" << p.y0 + 10 << "\" text-anchor=\"end\">"
      << fmt("%.0f", p.log2 ? std::exp2(p.hi) : p.hi) << "</text>\n";
    o << "<text x=\"" << left - 6 << "\" y=\"" << p.y0 + panel_h << "\" text-anchor=\"end\">"
      << fmt("%.0f", p.log2 ? std::exp2(p.lo) : p.lo) << "</text>\n";
    o << "<text x=\"" << left + plot_w << "\" y=\"" << p.y0 + panel_h + 14 << "\" text-anchor=\"end\">"
      << fmt("%.0f", t_max) << " s</text>\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
      const Series& s = series[i];
      const auto& vals = s.*(p.field);
      o << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << kPalette[i % 7] << "\" points=\"";
      for (std::size_t k = 0; k < s.t.size(); ++k) {
        double v = p.log2 ? std::log2(std::max(1.0, vals[k])) : vals[k];
        v = std::clamp((v - p.lo) / (p.hi - p.lo), 0.0, 1.0);
        o << fmt("%.1f", left + plot_w * s.t[k] / t_max) << "," << fmt("%.1f", p.y0 + panel_h * (1 - v)) << " ";
      }
      o << "\"/>\n";
    }
  }
  double y = top + 3 * (panel_h + gap) - 20;
  for (std::size_t i = 0; i < series.size(); ++i) {
    o << "<text x=\"" << left + 120.0 * static_cast<double>(i) << "\" y=\"" << y << "\" fill=\""
      << kPalette[i % 7] << "\">" << series[i].id << "</text>\n";
  }
  if (!rows.empty()) {
    y += 30;
    o << "<text x=\"" << left << "\" y=\"" << y << "\" font-weight=\"bold\">client  default MB/s  tuned MB/s  change</text>\n";
    for (const TotalsRow& r : rows) {
      y += 20;
      o << "<text x=\"" << left << "\" y=\"" << y << "\">" << r.id << "  " << fmt("%.1f", r.baseline) << "  "
        << fmt("%.1f", r.tuned) << "  " << improvement(r.baseline, r.tuned) << "</text>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

std::string ascii_report(const std::vector<Series>& series, const std::vector<TotalsRow>& rows) {
  constexpr int kCols = 60, kRows = 12;
  std::ostringstream o;
  for (const Series& s : series) {
    double t_max = 1, bw_max = 1;
    for (double t : s.t) t_max = std::max(t_max, t);
    for (double b : s.bw) bw_max = std::max(bw_max, b);
    std::vector<std::string> grid(kRows, std::string(kCols, ' '));
    for (std::size_t k = 0; k < s.t.size(); ++k) {
      const int col = std::min(kCols - 1, static_cast<int>(s.t[k] / t_max * (kCols - 1)));
      const int row = std::min(kRows - 1, static_cast<int>(s.bw[k] / bw_max * (kRows - 1)));
      grid[kRows - 1 - row][col] = '*';
    }
    o << "client " << s.id << ": transfer bandwidth (MB/s) vs time (s)\n";
    for (int r = 0; r < kRows; ++r) {
      const double label = bw_max * (kRows - 1 - r) / (kRows - 1);
      char buf[16];
      std::snprintf(buf, sizeof buf, "%9.1f |", label);
      o << buf << grid[r] << "\n";
    }
    o << "          +" << std::string(kCols, '-') << "\n";
    char buf[96];
    std::snprintf(buf, sizeof buf, "           0%*.0f\n", kCols - 1, t_max);
    o << buf;
    if (!s.t.empty()) {
      std::snprintf(buf, sizeof buf, "  params: start mppr=%.0f mrif=%.0f, end mppr=%.0f mrif=%.0f\n",
                    s.mppr.front(), s.mrif.front(), s.mppr.back(), s.mrif.back());
      o << buf;
    }
    o << "\n";
  }
  if (!rows.empty()) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-14s %14s %14s %10s\n", "client", "default MB/s", "tuned MB/s", "change");
    o << buf;
    double base_sum = 0, tuned_sum = 0;
    for (const TotalsRow& r : rows) {
      if (r.id == "total") {
        base_sum = r.baseline;
        tuned_sum = r.tuned;
        continue;
      }
      std::snprintf(buf, sizeof buf, "%-14s %14.1f %14.1f %10s\n", r.id.c_str(), r.baseline, r.tuned,
                    improvement(r.baseline, r.tuned).c_str());
      o << buf;
    }
    std::snprintf(buf, sizeof buf, "%-14s %14.1f %14.1f %10s\n", "Total BW", base_sum, tuned_sum,
                  improvement(base_sum, tuned_sum).c_str());
    o << buf;
  }
  return o.str();
}

}  // namespace

std::string render_report(const std::filesystem::path& tuned_dir, const std::filesystem::path& baseline_dir,
                          ReportFormat format) {
  const auto series = load_timeseries(tuned_dir);
  std::vector<TotalsRow> rows;
  if (!baseline_dir.empty()) rows = totals(load_summary(tuned_dir), load_summary(baseline_dir));
  return format == ReportFormat::Svg ? svg_report(series, rows) : ascii_report(series, rows);
}

}  // namespace iopathtune
