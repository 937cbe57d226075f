#include "fpnet/experiments.hpp"

#include "fpnet/format.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace fpnet {

PresetName parse_preset(const std::string& name) {
  if (name == "fig1_compressor_face_off") return PresetName::fig1_compressor_face_off;
  if (name == "fig2_compressor_bits") return PresetName::fig2_compressor_bits;
  if (name == "fig3_h_sweep") return PresetName::fig3_h_sweep;
  if (name == "fig4_bias_variance") return PresetName::fig4_bias_variance;
  if (name == "fig5_convex_compressors") return PresetName::fig5_convex_compressors;
  if (name == "fig6_convex_bias") return PresetName::fig6_convex_bias;
  throw InvalidParameter("unknown preset '" + name + "'");
}

std::string to_string(PresetName p) {
  switch (p) {
    case PresetName::fig1_compressor_face_off: return "fig1_compressor_face_off";
    case PresetName::fig2_compressor_bits: return "fig2_compressor_bits";
    case PresetName::fig3_h_sweep: return "fig3_h_sweep";
    case PresetName::fig4_bias_variance: return "fig4_bias_variance";
    case PresetName::fig5_convex_compressors: return "fig5_convex_compressors";
    case PresetName::fig6_convex_bias: return "fig6_convex_bias";
  }
  return "?";
}

std::vector<std::string> preset_names() {
  return {"fig1_compressor_face_off", "fig2_compressor_bits",    "fig3_h_sweep",
          "fig4_bias_variance",       "fig5_convex_compressors", "fig6_convex_bias"};
}

namespace {

void set_all(ConfigDoc& d, const std::vector<std::pair<std::string, std::string>>& kv) {
  for (const auto& [k, v] : kv) apply_override(d, k + "=" + v);
}

ConfigDoc nonconvex_base() {
  ConfigDoc d;
  set_all(d, {{"operators.suite", "nonconvex"},
              {"oracle.mechanism", "additive_gaussian"},
              {"scheduling.policy", "fixed_period"},
              {"scheduling.h", "3"},
              {"scheduling.step", "inv_sqrt"},
              {"scheduling.a", "80"},
              {"scheduling.b", "0.8"},
              {"scheduling.gamma", "0.7"},
              {"scheduling.psi", "0.99"},
              {"engine.horizon", "20000"}});
  return d;
}

ConfigDoc convex_base() {
  ConfigDoc d;
  set_all(d, {{"operators.suite", "strongly_convex"},
              {"oracle.mechanism", "additive_gaussian"},
              {"scheduling.policy", "fixed_period"},
              {"scheduling.h", "3"},
              {"scheduling.step", "inv_linear"},
              {"scheduling.a", "500"},
              {"scheduling.b", "8"},
              {"scheduling.gamma", "0.8"},
              {"scheduling.psi", "0.99"},
              {"engine.horizon", "10000"}});
  return d;
}

std::vector<GridPoint> compressor_points(std::initializer_list<const char*> kinds) {
  std::vector<GridPoint> pts;
  for (const char* k : kinds) pts.push_back({std::string("kind-") + k, {{"compression.kind", k}}});
  return pts;
}

std::vector<GridPoint> bias_grid() {
  std::vector<GridPoint> pts;
  for (const char* beta : {"0.05", "0.1", "0.2"})
    for (const char* sigma : {"0.05", "0.1", "0.2"}) {
      const double s = std::stod(sigma);
      pts.push_back({std::string("beta-") + beta + "_sigma-" + sigma,
                     {{"oracle.beta", beta}, {"oracle.noise_total_variance", fmt_double(s * s)}}});
    }
  return pts;
}

const std::vector<std::string> kGraphDefaults = {"network.topology", "network.edge_prob", "network.graph_seed",
                                                 "engine.horizon", "engine.seed"};

}  // namespace

ExperimentPreset preset(PresetName name) {
  ExperimentPreset p;
  p.name = to_string(name);
  p.flagged_defaults = kGraphDefaults;
  switch (name) {
    case PresetName::fig1_compressor_face_off:
      p.base = nonconvex_base();
      apply_override(p.base, "oracle.gradient_noise_variance=0.1");
      p.points = compressor_points({"c1", "c2"});
      break;
    case PresetName::fig2_compressor_bits:
      p.base = nonconvex_base();
      apply_override(p.base, "oracle.gradient_noise_variance=0.01");
      p.points = compressor_points({"c1", "c2", "c3"});
      break;
    case PresetName::fig3_h_sweep:
      p.base = nonconvex_base();
      apply_override(p.base, "oracle.gradient_noise_variance=0.01");
      apply_override(p.base, "compression.kind=c1");
      p.flagged_defaults.insert(p.flagged_defaults.end(),
                                {"oracle.gradient_noise_variance", "compression.kind"});
      for (const char* h : {"3", "8", "13"}) p.points.push_back({std::string("h-") + h, {{"scheduling.h", h}}});
      break;
    case PresetName::fig4_bias_variance:
      p.base = nonconvex_base();
      set_all(p.base, {{"oracle.mechanism", "synthetic_bias"}, {"compression.kind", "c2"}});
      p.flagged_defaults.insert(p.flagged_defaults.end(), {"oracle.beta", "oracle.noise_total_variance"});
      p.points = bias_grid();
      break;
    case PresetName::fig5_convex_compressors:
      p.base = convex_base();
      apply_override(p.base, "oracle.noise_total_variance=0.01");
      p.points = compressor_points({"c1", "c2", "c3"});
      break;
    case PresetName::fig6_convex_bias:
      p.base = convex_base();
      set_all(p.base, {{"oracle.mechanism", "synthetic_bias"}, {"compression.kind", "c2"}});
      p.flagged_defaults.insert(p.flagged_defaults.end(),
                                {"compression.kind", "oracle.beta", "oracle.noise_total_variance"});
      p.points = bias_grid();
      break;
  }
  return p;
}

std::vector<GridPoint> expand_grid(const std::vector<std::pair<std::string, std::vector<std::string>>>& axes) {
  std::vector<GridPoint> pts{{"", {}}};
  for (const auto& [key, values] : axes) {
    if (values.empty()) throw InvalidParameter("grid axis '" + key + "' has no values");
    const std::string short_key = key.substr(key.find('.') + 1);
    std::vector<GridPoint> next;
    for (const auto& p : pts)
      for (const auto& v : values) {
        GridPoint q = p;
        q.label += (q.label.empty() ? "" : "_") + short_key + "-" + v;
        q.overrides.emplace_back(key, v);
        next.push_back(std::move(q));
      }
    pts = std::move(next);
  }
  if (axes.empty()) pts.front().label = "base";
  return pts;
}

ConfigDoc apply_point(const ConfigDoc& base, const GridPoint& p) {
  ConfigDoc d = base;
  for (const auto& [k, v] : p.overrides) apply_override(d, k + "=" + v);
  return d;
}

std::string Manifest::to_text() const {
  std::ostringstream os;
  os << "manifest " << name << '\n';
  os << "seeds";
  for (auto s : seeds) os << ' ' << s;
  os << '\n';
  for (const auto& e : entries) {
    os << (e.kind == "error" ? "error" : "artifact " + e.kind) << ' ' << e.path;
    if (!e.sha256.empty()) os << " sha256=" << e.sha256;
    for (const auto& [k, v] : e.attrs) os << ' ' << k << '=' << v;
    os << '\n';
  }
  return os.str();
}

Manifest parse_manifest(const std::string& text) {
  Manifest m;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string head;
    ls >> head;
    if (head == "manifest") {
      ls >> m.name;
    } else if (head == "seeds") {
      std::uint64_t s;
      while (ls >> s) m.seeds.push_back(s);
    } else if (head == "artifact" || head == "error") {
      ManifestEntry e;
      if (head == "artifact") ls >> e.kind;
      else e.kind = "error";
      ls >> e.path;
      std::string tok;
      while (ls >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) throw ParseError("manifest: malformed attribute '" + tok + "'");
        const std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
        if (k == "sha256") e.sha256 = v;
        else e.attrs.emplace_back(k, v);
      }
      m.entries.push_back(std::move(e));
    } else if (!head.empty()) {
      throw ParseError("manifest: unexpected line '" + line + "'");
    }
  }
  return m;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("crypto", "SHA-256 computation failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string sha256_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("io", "cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return sha256_hex(ss.str());
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("io", "cannot write " + path.string());
  os << text;
  if (!os) throw Error("io", "write failed for " + path.string());
}

std::string resolved_value(const ResolvedRun& rr, const std::string& key) {
  for (const auto& [k, v] : rr.resolved)
    if (k == key) return v;
  return "";
}

std::string join(const std::vector<std::string>& v, char sep) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : std::string(1, sep)) + s;
  return out;
}

}  // namespace

std::vector<ManifestEntry> write_run_artifacts(const RunTrace& trace, const ConfigDoc& doc, const ResolvedRun& rr,
                                               const std::string& out_dir,
                                               const std::vector<std::pair<std::string, std::string>>& extra_meta) {
  fs::create_directories(out_dir);
  const fs::path csv = fs::path(out_dir) / (trace.run_id + ".csv");
  const fs::path side = fs::path(out_dir) / (trace.run_id + ".sidecar");
  write_trace_csv(trace, csv.string());

  ConfigDoc echo = doc;
  echo.set("engine", "seed", std::to_string(trace.seed));
  echo.set("engine", "run_id", trace.run_id);
  std::vector<std::pair<std::string, std::string>> meta = extra_meta;
  meta.emplace_back("run_id", trace.run_id);
  meta.emplace_back("seed", std::to_string(trace.seed));
  meta.emplace_back("averaging", "single-seed trace");
  meta.emplace_back("validator_governing", rr.governing.theorem + ":" + to_string(rr.governing.status));
  for (const auto& rep : trace.validation) meta.emplace_back("validator_" + rep.theorem, to_string(rep.status));
  for (const auto& [k, v] : rr.resolved) meta.emplace_back("resolved_" + k, v);
  const TraceRow& last = trace.rows.back();
  meta.emplace_back("bits_per_edge_total", std::to_string(last.bits_cumulative));
  meta.emplace_back("bits_per_message_total", std::to_string(trace.diag.bits_per_message));
  meta.emplace_back("index_bits_per_edge_total", std::to_string(trace.diag.index_bits));
  meta.emplace_back("comm_rounds", std::to_string(last.comm_rounds));
  meta.emplace_back("box_violations", std::to_string(trace.diag.box_violations));
  meta.emplace_back("max_mean_drift", fmt_double(trace.diag.max_mean_drift));
  meta.emplace_back("replicas_consistent", trace.diag.replicas_consistent ? "true" : "false");
  write_text(side, sidecar_text(echo, meta));

  const std::vector<std::pair<std::string, std::string>> attrs = {{"run_id", trace.run_id},
                                                                  {"seed", std::to_string(trace.seed)}};
  return {{"csv", csv.filename().string(), sha256_file(csv.string()), attrs},
          {"sidecar", side.filename().string(), sha256_file(side.string()), attrs}};
}

namespace {

std::string override_value(const GridPoint& p, const std::string& key) {
  for (const auto& [k, v] : p.overrides)
    if (k == key) return v;
  return "";
}

VerdictReport point_verdict(const std::vector<RunTrace>& traces, const RunConfig& rc, const ResolvedRun& rr) {
  VerdictInputs in;
  in.step = rc.step;
  in.biased = rc.oracle.declared.beta > 0.0 || rc.oracle.declared.p > 0.0;
  const bool thm2 = rc.step.kind == StepKind::inv_linear;
  const std::string c = resolved_value(rr, thm2 ? "c2" : "c1");
  in.c_const = c.empty() ? 0.0 : std::stod(c);
  if (thm2) in.slope_tolerance = 0.3;
  VerdictReport raw = thm2 ? verdict_theorem2(traces, in) : verdict_theorem1(traces, in);
  if (!c.empty()) return raw;
  VerdictReport out;
  out.subject = raw.subject;
  for (auto cl : raw.clauses) {
    if (cl.name.rfind("consensus", 0) == 0) {
      cl.status = VerdictStatus::skip;
      cl.detail = "constant unavailable: zeta1 <= 0 for these parameters";
    }
    out.add(cl);
  }
  return out;
}

}  // namespace

std::vector<VerdictClause> cross_point_verdicts(const std::string& name, const std::vector<GridPoint>& points,
                                                const std::vector<PointSummary>& summaries) {
  std::vector<VerdictClause> out;
  if (name == "fig3_h_sweep") {
    for (std::size_t k = 0; k < points.size(); ++k) {
      if (summaries[k].completed == 0) continue;
      const long expected = summaries[k].expected_rounds;
      out.push_back({"comm_rounds_" + points[k].label,
                     summaries[k].comm_rounds == expected ? VerdictStatus::pass : VerdictStatus::fail,
                     double(summaries[k].comm_rounds), double(expected), "fixed_period cardinality"});
    }
  }
  if (name == "fig4_bias_variance" || name == "fig6_convex_bias") {
    const bool convex = name == "fig6_convex_bias";
    std::map<std::string, std::vector<std::pair<double, PlateauEstimate>>> by_sigma, by_beta;
    for (std::size_t k = 0; k < points.size(); ++k) {
      if (summaries[k].completed == 0) continue;
      const std::string beta = override_value(points[k], "oracle.beta");
      const std::string var = override_value(points[k], "oracle.noise_total_variance");
      const PlateauEstimate pl = convex ? summaries[k].dist_plateau : summaries[k].residual_plateau;
      by_sigma[var].emplace_back(std::stod(beta), pl);
      by_beta[beta].emplace_back(std::stod(var), pl);
    }
    auto emit = [&](const std::string& prefix, auto& groups) {
      for (auto& [fixed, series] : groups) {
        std::sort(series.begin(), series.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<PlateauEstimate> levels;
        for (const auto& s : series) levels.push_back(s.second);
        out.push_back(plateau_ordering(prefix + fixed, levels));
      }
    };
    emit("plateau_increasing_in_beta_at_var-", by_sigma);
    emit("plateau_increasing_in_var_at_beta-", by_beta);
  }
  return out;
}

Manifest run_points(const std::string& name, const ConfigDoc& base, const std::vector<GridPoint>& points,
                    const std::vector<std::uint64_t>& seeds, const std::string& out_dir,
                    const std::vector<std::string>& flagged_defaults, const BatchOptions& opts) {
  if (points.empty()) throw InvalidParameter("no sweep points");
  if (seeds.empty()) throw InvalidParameter("no seeds");
  fs::create_directories(out_dir);
  Manifest m;
  m.name = name;
  m.seeds = seeds;
  std::ostringstream verdicts;
  std::vector<PointSummary> summaries(points.size());

  for (std::size_t k = 0; k < points.size(); ++k) {
    const GridPoint& pt = points[k];
    summaries[k].label = pt.label;
    ConfigDoc doc;
    ResolvedRun rr;
    try {
      doc = apply_point(base, pt);
      rr = resolve(doc);
    } catch (const Error& e) {
      m.entries.push_back({"error", pt.label, "", {{"code", e.code()}, {"stage", "resolve"}}});
      continue;
    }
    if (rr.governing.status == Severity::fail && !opts.allow_warn) {
      m.entries.push_back({"error", pt.label, "", {{"code", "validator-fail"}, {"stage", "validate"}}});
      continue;
    }
    const RunConfig rc = rr.run;
    const std::vector<SweepResult> results =
        run_sweep(rc, {{pt.label, [&rc](RunConfig& c) { c = rc; }}}, seeds);
    std::vector<RunTrace> traces;
    const std::vector<std::pair<std::string, std::string>> meta = {
        {"experiment", name}, {"point", pt.label}, {"flagged_defaults", join(flagged_defaults, ',')}};
    for (const SweepResult& r : results) {
      if (!r.trace) {
        m.entries.push_back({"error", r.label + "_seed" + std::to_string(r.seed), "",
                             {{"code", r.error_code}, {"seed", std::to_string(r.seed)}}});
        if (!opts.quiet) std::cerr << "error " << r.error_code << ": " << r.error << '\n';
        continue;
      }
      for (auto& e : write_run_artifacts(*r.trace, doc, rr, out_dir, meta)) {
        e.attrs.emplace_back("point", pt.label);
        m.entries.push_back(std::move(e));
      }
      traces.push_back(*r.trace);
    }
    summaries[k].completed = static_cast<int>(traces.size());
    if (traces.empty()) continue;
    summaries[k].residual_plateau = plateau_of(traces, "residual");
    if (rc.x_star) summaries[k].dist_plateau = plateau_of(traces, "dist");
    summaries[k].comm_rounds = traces.front().rows.back().comm_rounds;
    summaries[k].expected_rounds = make_schedule(rc.comm.policy, rc.horizon, rc.comm.h, rc.comm.seed).rounds();
    if (opts.verdicts) {
      VerdictReport v = point_verdict(traces, rc, rr);
      v.subject += " point=" + pt.label;
      verdicts << v.to_text();
    }
    if (!opts.quiet) std::cerr << "point " << pt.label << " done (" << traces.size() << " runs)\n";
  }

  if (opts.verdicts) {
    VerdictReport cross;
    cross.subject = "cross_point " + name;
    for (auto& c : cross_point_verdicts(name, points, summaries)) cross.add(c);
    if (!cross.clauses.empty()) verdicts << cross.to_text();
    const fs::path vp = fs::path(out_dir) / "verdicts.txt";
    write_text(vp, verdicts.str());
    m.entries.push_back({"verdict", vp.filename().string(), sha256_file(vp.string()), {}});
  }
  write_text(fs::path(out_dir) / "manifest.txt", m.to_text());
  return m;
}

Manifest run_preset(const ExperimentPreset& p, const std::vector<std::uint64_t>& seeds, const std::string& out_dir,
                    const BatchOptions& opts) {
  return run_points(p.name, p.base, p.points, seeds, out_dir, p.flagged_defaults, opts);
}

}  // namespace fpnet
