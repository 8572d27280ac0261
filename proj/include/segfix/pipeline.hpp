#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "segfix/corrector.hpp"
#include "segfix/errormap.hpp"
#include "segfix/refine.hpp"
#include "segfix/synth.hpp"

namespace segfix {

enum class Stage { config, load, synth, detect, refine, evaluate };

std::string to_string(Stage s);
/// Process exit code for a failure in `s`; 0 is reserved for success.
int exit_code(Stage s);

class StageError : public std::runtime_error {
 public:
  StageError(Stage stage, const std::string& what)
      : std::runtime_error(to_string(stage) + ": " + what), stage_(stage) {}
  Stage stage() const { return stage_; }

 private:
  Stage stage_;
};

/// "oracle", "noisy:<fp>,<fn>" or "constant:<value>".
struct BackendSpec {
  enum class Kind { oracle, noisy, constant };

  Kind kind = Kind::oracle;
  double fp = 0.0;
  double fn = 0.0;
  double value = 0.5;

  static BackendSpec parse(const std::string& s);
  std::string to_string() const;
};

std::unique_ptr<DetectorBackend> make_detector(const BackendSpec& spec,
                                               std::shared_ptr<const LabelVolume> gt,
                                               const ErrorWindowSpec& window, std::uint64_t seed,
                                               int threads = 1);
std::unique_ptr<CorrectorBackend> make_corrector(const BackendSpec& spec,
                                                 std::shared_ptr<const LabelVolume> gt,
                                                 std::uint64_t seed);

ErrorWindowSpec error_window_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ErrorWindowSpec& w);
RefinementConfig refinement_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RefinementConfig& c);
EvalPointConfig eval_point_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EvalPointConfig& c);

struct PipelineConfig {
  /// The config file exactly as read; echoed into the report.
  std::string text;

  std::uint64_t seed = 1;
  int threads = 1;
  BackendSpec detector;
  BackendSpec corrector;
  RefinementConfig refine;

  // Input: either a synthetic volume or files on disk.
  std::optional<SynthConfig> synth;
  MutationPlan mutations;
  std::filesystem::path gt_path;
  std::filesystem::path supervoxels_path;
  std::filesystem::path graph_path;
  std::filesystem::path raw_path;

  bool include_background = false;
  std::optional<EvalPointConfig> points;

  std::filesystem::path out;

  /// Parses config JSON text; relative paths resolve against `base_dir`.
  static PipelineConfig parse(const std::string& text, const std::filesystem::path& base_dir = {});
  /// Effective settings after flag overrides, for the report.
  nlohmann::json effective() const;
};

PipelineConfig load_pipeline_config(const std::filesystem::path& path);

struct RunReport {
  /// Everything except timings; identical across runs with equal inputs.
  nlohmann::json body;
  nlohmann::json timings = nlohmann::json::object();

  nlohmann::json to_json(bool with_timing = true) const;
};

/// Runs load or synth, detect, refine and evaluate. Failures are rethrown as
/// StageError tagged with the stage. Artifacts go to config.out when set.
RunReport run_pipeline(const PipelineConfig& config);

/// JSON text with every floating value written with 17 significant digits.
std::string dump_json(const nlohmann::json& j, int indent = 2);
void write_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

/// One row per ground-truth object: gt,vi_split,vi_merge,vi,weight.
std::string per_object_csv(const nlohmann::json& evaluation);

}  // namespace segfix
