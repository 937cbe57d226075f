#include "fpnet/cli.hpp"

#include "fpnet/config.hpp"
#include "fpnet/experiments.hpp"
#include "fpnet/format.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <ostream>
#include <sstream>

namespace fpnet {

std::vector<unsigned long long> parse_seed_list(const std::string& spec) {
  std::vector<unsigned long long> out;
  std::stringstream ss(spec);
  std::string part;
  auto num = [&](const std::string& s) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(s, &pos);
    } catch (const std::logic_error&) {
      pos = 0;
    }
    if (pos == 0 || pos != s.size() || s[0] == '-') throw ParseError("bad seed list '" + spec + "'");
    return v;
  };
  while (std::getline(ss, part, ',')) {
    const auto dash = part.find('-');
    if (dash == std::string::npos) {
      out.push_back(num(part));
    } else {
      const auto lo = num(part.substr(0, dash)), hi = num(part.substr(dash + 1));
      if (hi < lo) throw ParseError("bad seed range '" + part + "'");
      for (auto s = lo; s <= hi; ++s) out.push_back(s);
    }
  }
  if (out.empty()) throw ParseError("empty seed list");
  return out;
}

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  bool allow_warn = false;
};

ConfigDoc load_with_overrides(const Common& c) {
  ConfigDoc doc = c.config_path.empty() ? ConfigDoc() : load_config(c.config_path);
  for (const auto& o : c.overrides) apply_override(doc, o);
  return doc;
}

// Refuses FAIL configurations unless allowed; prints a banner for WARN.
void gate(const ResolvedRun& rr, bool allow_warn, std::ostream& err) {
  if (rr.governing.status == Severity::fail && !allow_warn) {
    std::string failing;
    for (const auto& c : rr.governing.conditions)
      if (c.severity == Severity::fail) failing += (failing.empty() ? "" : ",") + c.name;
    throw Error("validator-fail", rr.governing.theorem + " FAIL on " + failing + " (use --allow-warn to run anyway)");
  }
  if (rr.governing.status != Severity::pass)
    err << "WARNING: " << rr.governing.theorem << " status=" << to_string(rr.governing.status)
        << "; parameters lie outside the theorem hypotheses\n";
}

void add_common(CLI::App* sub, Common& c, bool needs_config) {
  auto* opt = sub->add_option("--config", c.config_path, "configuration file");
  if (needs_config) opt->required();
  sub->add_option("--set", c.overrides, "override section.key=value (repeatable)");
  sub->add_flag("--allow-warn", c.allow_warn, "run configurations whose validator status is FAIL");
}

std::vector<std::uint64_t> to_u64(const std::vector<unsigned long long>& v) { return {v.begin(), v.end()}; }

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"fpnet: distributed fixed-point iteration with compressed, period-skipping communication"};
  app.require_subcommand(1);

  Common run_c, sweep_c, preset_c, val_c, cert_c, fix_c;
  std::string out_dir = ".";
  std::string seeds_spec;
  std::vector<std::string> grid;
  std::string preset_name;
  unsigned long long seed = 0;
  bool seed_given = false;
  int trials = 10000;
  double tol = 1e-10;
  bool no_verdicts = false;

  auto* run_cmd = app.add_subcommand("run", "single engine run: one CSV trace plus sidecar");
  add_common(run_cmd, run_c, true);
  run_cmd->add_option("--seed", seed, "master seed")->each([&](const std::string&) { seed_given = true; });
  run_cmd->add_option("--out-dir", out_dir, "output directory");

  auto* sweep_cmd = app.add_subcommand("sweep", "grid x seeds sweep with verdicts and manifest");
  add_common(sweep_cmd, sweep_c, true);
  sweep_cmd->add_option("--grid", grid, "axis section.key=v1,v2,... (repeatable)");
  sweep_cmd->add_option("--seeds", seeds_spec, "seed list: 3 | 1,4,9 | 1-20")->default_val("1");
  sweep_cmd->add_option("--out-dir", out_dir, "output directory");
  sweep_cmd->add_flag("--no-verdicts", no_verdicts, "skip the verdict report");

  auto* preset_cmd = app.add_subcommand("preset", "run a figure preset");
  add_common(preset_cmd, preset_c, false);
  preset_cmd->add_option("name", preset_name, "preset name")->required();
  preset_cmd->add_option("--seeds", seeds_spec, "seed list")->default_val("1-20");
  preset_cmd->add_option("--out-dir", out_dir, "output directory");
  preset_cmd->add_flag("--no-verdicts", no_verdicts, "skip the verdict report");

  auto* val_cmd = app.add_subcommand("validate-params", "print theorem hypotheses with margins");
  add_common(val_cmd, val_c, true);

  auto* cert_cmd = app.add_subcommand("certify", "Monte-Carlo certification of compressor and oracle");
  add_common(cert_cmd, cert_c, true);
  cert_cmd->add_option("--trials", trials, "Monte-Carlo trials per sampled point")->default_val(10000);

  auto* fix_cmd = app.add_subcommand("fixpoint", "centralised fixed point of the configured suite");
  add_common(fix_cmd, fix_c, true);
  fix_cmd->add_option("--tol", tol, "residual tolerance")->default_val(1e-10);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error usage: " << e.what() << '\n';
    return 64;
  }

  try {
    if (run_cmd->parsed()) {
      ConfigDoc doc = load_with_overrides(run_c);
      if (seed_given) doc.set("engine", "seed", std::to_string(seed));
      const ResolvedRun rr = resolve(doc);
      gate(rr, run_c.allow_warn, err);
      const RunTrace trace = run(rr.run);
      const auto entries = write_run_artifacts(trace, doc, rr, out_dir);
      const TraceRow& last = trace.rows.back();
      out << "run " << trace.run_id << " status=ok rows=" << trace.rows.size()
          << " residual=" << fmt_double(last.residual) << " bits=" << last.bits_cumulative
          << " csv=" << (std::filesystem::path(out_dir) / entries[0].path).string() << '\n';
      return 0;
    }
    if (sweep_cmd->parsed()) {
      const ConfigDoc doc = load_with_overrides(sweep_c);
      std::vector<std::pair<std::string, std::vector<std::string>>> axes;
      for (const auto& g : grid) {
        const auto eq = g.find('=');
        if (eq == std::string::npos) throw ParseError("grid axis '" + g + "' is not section.key=v1,v2");
        std::vector<std::string> values;
        std::stringstream ss(g.substr(eq + 1));
        std::string v;
        while (std::getline(ss, v, ',')) values.push_back(v);
        axes.emplace_back(g.substr(0, eq), values);
      }
      const auto points = expand_grid(axes);
      for (const auto& p : points) gate(resolve(apply_point(doc, p)), sweep_c.allow_warn, err);
      BatchOptions bo;
      bo.allow_warn = sweep_c.allow_warn;
      bo.verdicts = !no_verdicts;
      const Manifest m = run_points("sweep", doc, points, to_u64(parse_seed_list(seeds_spec)), out_dir, {}, bo);
      out << "sweep status=ok entries=" << m.entries.size() << " manifest="
          << (std::filesystem::path(out_dir) / "manifest.txt").string() << '\n';
      return 0;
    }
    if (preset_cmd->parsed()) {
      ExperimentPreset p = preset(parse_preset(preset_name));
      if (!preset_c.config_path.empty()) p.base = load_config(preset_c.config_path);
      for (const auto& o : preset_c.overrides) apply_override(p.base, o);
      for (const auto& pt : p.points) gate(resolve(apply_point(p.base, pt)), preset_c.allow_warn, err);
      BatchOptions bo;
      bo.allow_warn = preset_c.allow_warn;
      bo.verdicts = !no_verdicts;
      bo.quiet = false;
      const Manifest m = run_preset(p, to_u64(parse_seed_list(seeds_spec)), out_dir, bo);
      out << "preset " << p.name << " status=ok entries=" << m.entries.size() << " manifest="
          << (std::filesystem::path(out_dir) / "manifest.txt").string() << '\n';
      return 0;
    }
    if (val_cmd->parsed()) {
      const ResolvedRun rr = resolve(load_with_overrides(val_c));
      out << "governing " << rr.governing.theorem << " status=" << to_string(rr.governing.status) << '\n';
      for (const auto& r : rr.reports) out << r.to_text();
      for (const auto& [k, v] : rr.resolved) out << "resolved " << k << '=' << v << '\n';
      return 0;
    }
    if (cert_cmd->parsed()) {
      const ResolvedRun rr = resolve(load_with_overrides(cert_c));
      const int dim = rr.run.compressor.dim;
      CompressorCertifyOptions co;
      co.n_trials = trials;
      bool pass = true;
      const std::vector<std::pair<std::string, VectorSampler>> samplers = {
          {"gaussian", gaussian_sampler(dim)},
          {"uniform_box", uniform_box_sampler(dim)},
          {"sparse", sparse_sampler(dim, std::max(1, dim / 10))}};
      for (const auto& [name, s] : samplers) {
        const CertificationReport r = certify_compressor(rr.run.compressor, s, co);
        pass = pass && r.pass;
        out << "sampler " << name << '\n' << r.to_text();
      }
      OracleCertifyOptions oo;
      oo.n_samples = trials;
      oo.sample_box = rr.run.op->box_radius;
      for (std::size_t i = 0; i < rr.run.op->locals.size(); ++i) {
        const CertificationReport r = certify_oracle(rr.run.oracle, rr.run.op->locals[i], oo);
        pass = pass && r.pass;
        out << "agent " << i << '\n' << r.to_text();
      }
      out << "certify status=" << (pass ? "PASS" : "FAIL") << '\n';
      if (!pass) {
        err << "error certification-failed: a declared constant was violated beyond 3-sigma slack\n";
        return 4;
      }
      return 0;
    }
    if (fix_cmd->parsed()) {
      const ConfigDoc doc = load_with_overrides(fix_c);
      ConfigDoc light = doc;
      light.set("operators", "x_star", "none");
      light.set("oracle", "d_bound", "0");
      const ResolvedRun rr = resolve(light);
      FixedPointOptions fo;
      fo.tol = tol;
      const FixedPointResult fp = find_fixed_point(*rr.run.op, fo);
      out << "fixpoint residual=" << fmt_double(fp.residual) << " iterations=" << fp.iterations
          << " method=" << (fp.local_stationary ? "km" : "picard") << " norm=" << fmt_double(fp.x.norm()) << '\n';
      out << "x =";
      for (Eigen::Index k = 0; k < fp.x.size(); ++k) out << ' ' << fmt_double(fp.x(k));
      out << '\n';
      return 0;
    }
  } catch (const Error& e) {
    err << "error " << e.code() << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error internal: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace fpnet
