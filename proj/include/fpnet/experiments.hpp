#pragma once

#include "fpnet/analysis.hpp"
#include "fpnet/config.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace fpnet {

/// One sweep point: a label and the overrides applied to the base config.
struct GridPoint {
  std::string label;
  std::vector<std::pair<std::string, std::string>> overrides;  // "section.key" -> value
};

enum class PresetName {
  fig1_compressor_face_off,
  fig2_compressor_bits,
  fig3_h_sweep,
  fig4_bias_variance,
  fig5_convex_compressors,
  fig6_convex_bias,
};

PresetName parse_preset(const std::string& name);
std::string to_string(PresetName p);
std::vector<std::string> preset_names();

struct ExperimentPreset {
  std::string name;
  ConfigDoc base;
  std::vector<GridPoint> points;
  /// Keys whose values are defaults chosen here rather than stated settings.
  std::vector<std::string> flagged_defaults;
  int default_seeds = 20;
};

ExperimentPreset preset(PresetName name);

/// Cartesian product of `section.key -> values` axes; labels join
/// `key-value` pairs with '_'.
std::vector<GridPoint> expand_grid(const std::vector<std::pair<std::string, std::vector<std::string>>>& axes);

ConfigDoc apply_point(const ConfigDoc& base, const GridPoint& p);

struct ManifestEntry {
  std::string kind;  // csv | sidecar | verdict | error
  std::string path;  // relative to the output directory
  std::string sha256;
  std::vector<std::pair<std::string, std::string>> attrs;
};

struct Manifest {
  std::string name;
  std::vector<std::uint64_t> seeds;
  std::vector<ManifestEntry> entries;
  std::string to_text() const;
};

/// Parses manifest.txt back into entries (paths stay relative).
Manifest parse_manifest(const std::string& text);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

struct BatchOptions {
  bool allow_warn = false;  // run configurations whose validator status is FAIL
  bool verdicts = true;
  bool quiet = true;
};

/// Runs every point x seed, writes `<label>_seed<k>.csv` and `.sidecar`
/// files, a verdict report and `manifest.txt` into `out_dir`. Per-run
/// failures become `error` entries.
Manifest run_points(const std::string& name, const ConfigDoc& base, const std::vector<GridPoint>& points,
                    const std::vector<std::uint64_t>& seeds, const std::string& out_dir,
                    const std::vector<std::string>& flagged_defaults = {}, const BatchOptions& opts = {});

Manifest run_preset(const ExperimentPreset& p, const std::vector<std::uint64_t>& seeds, const std::string& out_dir,
                    const BatchOptions& opts = {});

/// Writes one trace and its sidecar; returns the two manifest entries.
std::vector<ManifestEntry> write_run_artifacts(const RunTrace& trace, const ConfigDoc& doc, const ResolvedRun& rr,
                                               const std::string& out_dir,
                                               const std::vector<std::pair<std::string, std::string>>& extra_meta = {});

/// Per-point aggregates kept after the traces are written and released.
struct PointSummary {
  std::string label;
  int completed = 0;
  PlateauEstimate residual_plateau;
  PlateauEstimate dist_plateau;
  long comm_rounds = 0;
  long expected_rounds = 0;  // |I_T| of the point's schedule
};

/// Claims spanning several sweep points: comm_rounds ratios for fig3 and
/// plateau ordering along each bias/variance axis for fig4 and fig6.
std::vector<VerdictClause> cross_point_verdicts(const std::string& name, const std::vector<GridPoint>& points,
                                                const std::vector<PointSummary>& summaries);

}  // namespace fpnet
