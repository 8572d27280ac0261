// segfix: command-line front end for detection, correction and evaluation.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "segfix/metrics.hpp"
#include "segfix/pipeline.hpp"

namespace {

using json = nlohmann::json;
using namespace segfix;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string detector;
  std::string corrector;
  std::string out;
};

struct Inputs {
  std::string gt;
  std::string supervoxels;
  std::string graph;
  std::string raw;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("segfix");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("SEGFIX_LOG");
  spdlog::set_level(env != nullptr ? spdlog::level::from_str(env) : spdlog::level::warn);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StageError(Stage::config, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<int> parse_triple(const std::string& s) {
  std::vector<int> v;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) v.push_back(std::stoi(part));
  if (v.size() != 3) throw StageError(Stage::config, "expected x,y,z but got '" + s + "'");
  return v;
}

void apply_flags(PipelineConfig& c, const Common& f) {
  try {
    if (f.seed) {
      c.seed = *f.seed;
      c.refine.seed = *f.seed;
      if (c.synth) c.synth->seed = *f.seed;
      c.mutations.seed = *f.seed;
      if (c.points) c.points->seed = *f.seed;
    }
    if (f.threads) {
      if (*f.threads < 1) throw std::invalid_argument("--threads must be >= 1");
      c.threads = *f.threads;
    }
    if (!f.detector.empty()) c.detector = BackendSpec::parse(f.detector);
    if (!f.corrector.empty()) c.corrector = BackendSpec::parse(f.corrector);
    if (c.detector.kind == BackendSpec::Kind::constant) {
      throw std::invalid_argument("detector backend must be oracle or noisy");
    }
    if (!f.out.empty()) c.out = f.out;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(Stage::config, e.what());
  }
}

/// Config for the single-stage subcommands: the optional --config file with
/// input paths taken from flags.
PipelineConfig stage_config(const Common& f, const Inputs& in) {
  json j = f.config.empty() ? json::object() : json::parse(slurp(f.config), nullptr, false);
  if (j.is_discarded()) throw StageError(Stage::config, "config is not valid JSON");
  json& paths = j["input"];
  if (!in.gt.empty()) paths["gt"] = in.gt;
  if (!in.supervoxels.empty()) paths["supervoxels"] = in.supervoxels;
  if (!in.graph.empty()) paths["graph"] = in.graph;
  if (!in.raw.empty()) paths["raw"] = in.raw;
  j.erase("synth");
  PipelineConfig c = PipelineConfig::parse(j.dump());
  apply_flags(c, f);
  return c;
}

struct Loaded {
  std::shared_ptr<const LabelVolume> gt;
  SegmentationView view;
  std::shared_ptr<const RawVolume> raw;
};

Loaded load_inputs(const PipelineConfig& c) {
  try {
    Loaded l;
    l.gt = std::make_shared<const LabelVolume>(read_label_volume(c.gt_path));
    l.view = SegmentationView{read_label_volume(c.supervoxels_path),
                              SegGraph::from_json(read_json(c.graph_path))};
    if (!(l.view.supervoxels.shape() == l.gt->shape())) {
      throw std::invalid_argument("supervoxel and ground-truth volumes differ in shape");
    }
    if (!c.raw_path.empty()) {
      l.raw = std::make_shared<const RawVolume>(read_raw_volume(c.raw_path));
    }
    return l;
  } catch (const std::exception& e) {
    throw StageError(Stage::load, e.what());
  }
}

void emit(const json& j, const std::string& out_dir, const char* name) {
  std::cout << dump_json(j) << '\n';
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_json(j, std::filesystem::path(out_dir) / name);
  }
}

void add_common(CLI::App* app, Common& f, bool backends) {
  app->add_option("--config", f.config, "JSON config file");
  app->add_option("--seed", f.seed, "seed for every random choice");
  app->add_option("--threads", f.threads, "worker threads (default 1)");
  if (backends) {
    app->add_option("--detector", f.detector, "oracle | noisy:<fp>,<fn>");
    app->add_option("--corrector", f.corrector, "oracle | noisy:<fp>,<fn> | constant:<v>");
  }
  app->add_option("--out", f.out, "output directory");
}

void add_inputs(CLI::App* app, Inputs& in) {
  app->add_option("--gt", in.gt, "ground-truth label volume");
  app->add_option("--supervoxels", in.supervoxels, "supervoxel label volume");
  app->add_option("--graph", in.graph, "proposal graph JSON");
  app->add_option("--raw", in.raw, "raw image volume");
}

int cmd_synth(const Common& f) {
  json j = f.config.empty() ? json::object() : json::parse(slurp(f.config), nullptr, false);
  if (j.is_discarded()) throw StageError(Stage::config, "config is not valid JSON");
  if (j.contains("synth")) j = j.at("synth");
  if (f.out.empty()) throw StageError(Stage::config, "synth needs --out");
  SynthConfig sc;
  MutationPlan plan;
  try {
    sc = SynthConfig::from_json(j);
    if (f.seed) sc.seed = *f.seed;
    plan.seed = sc.seed;
    if (j.contains("mutations")) {
      const json& m = j.at("mutations");
      plan.merges = m.value("merges", 0);
      plan.splits = m.value("splits", 0);
      plan.max_gap = m.value("max_gap", 1);
      if (m.contains("seed") && !f.seed) plan.seed = m.at("seed").get<std::uint64_t>();
    }
  } catch (const std::exception& e) {
    throw StageError(Stage::config, e.what());
  }
  try {
    spdlog::info("generating {}x{}x{} volume with {} objects", sc.shape.x, sc.shape.y, sc.shape.z,
                 sc.objects);
    const SynthVolumes v = generate_gt(sc);
    const auto mutations = random_mutations(v.gt, v.supervoxels, plan);
    const SegmentationView view = inject_errors(v.gt, v.supervoxels, mutations);
    const std::filesystem::path out = f.out;
    std::filesystem::create_directories(out);
    write_volume(v.gt, out / "gt.raw");
    write_volume(v.supervoxels, out / "supervoxels.raw");
    write_json(view.graph.to_json(), out / "proposal_graph.json");
    write_json(SegGraph::build(v.supervoxels, ground_truth_edges(v.gt, v.supervoxels)).to_json(),
               out / "gt_graph.json");
    json log = json::array();
    for (const auto& m : mutations) log.push_back(m.to_json());
    write_json(log, out / "mutations.json");
    std::cout << dump_json({{"supervoxels", view.graph.vertex_count()},
                            {"objects", sc.objects},
                            {"mutations", mutations.size()},
                            {"proposal_segments", view.graph.component_count()}})
              << '\n';
  } catch (const std::exception& e) {
    throw StageError(Stage::synth, e.what());
  }
  return 0;
}

int cmd_detect(const Common& f, const Inputs& in, const std::string& window,
               const std::string& border) {
  PipelineConfig c = stage_config(f, in);
  if (!window.empty() || !border.empty()) {
    const Shape3 shape = window.empty() ? c.refine.error_window.shape : [&] {
      const auto v = parse_triple(window);
      return Shape3(v[0], v[1], v[2]);
    }();
    const BorderMode mode = border.empty() ? c.refine.error_window.mode : parse_border_mode(border);
    try {
      c.refine.error_window = ErrorWindowSpec(shape, mode);
    } catch (const std::exception& e) {
      throw StageError(Stage::config, e.what());
    }
  }
  const Loaded l = load_inputs(c);
  try {
    const auto det = make_detector(c.detector, l.gt, c.refine.error_window, c.seed, c.threads);
    const LabelVolume seg = render_labels(l.view);
    const ErrorMap map = det->detect(seg, l.raw.get());
    const ErrorMap bin = binarize(map, c.refine.threshold);
    std::size_t flagged = 0, domain = 0, foreground = 0;
    for (std::size_t i = 0; i < seg.size(); ++i) {
      flagged += bin.values[i] == 1.0f;
      domain += map.in_domain[i];
      foreground += seg[i] != 0;
    }
    if (!c.out.empty()) {
      std::filesystem::create_directories(c.out);
      write_volume(map.values, c.out / "error_map.raw");
    }
    emit({{"detector", c.detector.to_string()},
          {"window", to_json(c.refine.error_window)},
          {"threshold", c.refine.threshold},
          {"error_voxels", flagged},
          {"foreground_voxels", foreground},
          {"coverage", static_cast<double>(domain) / static_cast<double>(seg.size())}},
         c.out.string(), "detect.json");
  } catch (const std::exception& e) {
    throw StageError(Stage::detect, e.what());
  }
  return 0;
}

int cmd_correct(const Common& f, const Inputs& in, const std::string& center) {
  PipelineConfig c = stage_config(f, in);
  const auto v = parse_triple(center);
  const Point3 p{v[0], v[1], v[2]};
  Loaded l = load_inputs(c);
  try {
    const auto det = make_detector(c.detector, l.gt, c.refine.error_window, c.seed, c.threads);
    const auto cor = make_corrector(c.corrector, l.gt, c.seed);
    const LabelVolume seg = render_labels(l.view);
    const ErrorMap bin = binarize(det->detect(seg, l.raw.get()), c.refine.threshold);
    PruningTask task = advice_mask(seg, l.view.supervoxels, bin, p, c.refine.corrector_window,
                                   c.refine.corrector_border);
    if (l.raw) task.raw = l.raw->crop(task.window);
    const SoftMask m = cor->correct(task);
    const auto scores =
        score_supervoxels(m, task.supervoxels, central_box(task.window, p, c.refine.corrector_window));
    const SupervoxelDecision d = decide(scores, c.refine.lo, c.refine.hi);
    json s = json::object();
    for (const auto& [sv, score] : scores) s[std::to_string(sv)] = score;
    json result{{"center", {p.x, p.y, p.z}},
                {"window", {{"min", {task.window.min.x, task.window.min.y, task.window.min.z}},
                            {"max", {task.window.max.x, task.window.max.y, task.window.max.z}}}},
                {"scores", std::move(s)},
                {"abstain", d.abstain},
                {"merge", d.merge},
                {"cut", d.cut}};
    if (!d.abstain) {
      l.view.graph.apply(d.merge, d.cut, d.merge);
      if (!c.out.empty()) {
        std::filesystem::create_directories(c.out);
        write_json(l.view.graph.to_json(), c.out / "graph.json");
      }
    }
    emit(result, c.out.string(), "correct.json");
  } catch (const std::exception& e) {
    throw StageError(Stage::refine, e.what());
  }
  return 0;
}

int cmd_refine(const Common& f, const Inputs& in) {
  PipelineConfig c = stage_config(f, in);
  Loaded l = load_inputs(c);
  RefinementState state;
  std::unique_ptr<DetectorBackend> det;
  try {
    det = make_detector(c.detector, l.gt, c.refine.error_window, c.seed, c.threads);
    state = init_state(std::move(l.view), *det, c.refine, l.raw);
  } catch (const std::exception& e) {
    throw StageError(Stage::detect, e.what());
  }
  try {
    const auto cor = make_corrector(c.corrector, l.gt, c.seed);
    spdlog::info("refining from {} error voxels", state.initial_error_voxels);
    const RefinementReport r = run(state, *det, *cor, c.refine);
    if (!c.out.empty()) {
      std::filesystem::create_directories(c.out);
      write_json(state.view.graph.to_json(), c.out / "final_graph.json");
      write_volume(state.segmentation, c.out / "segmentation.raw");
    }
    emit(r.to_json(), c.out.string(), "refine.json");
  } catch (const std::exception& e) {
    throw StageError(Stage::refine, e.what());
  }
  return 0;
}

int cmd_evaluate(const Common& f, const Inputs& in, const std::string& proposal,
                 bool include_background, const std::string& csv) {
  LabelVolume gt, prop;
  try {
    if (in.gt.empty()) throw std::invalid_argument("evaluate needs --gt");
    gt = read_label_volume(in.gt);
    if (!proposal.empty()) {
      prop = read_label_volume(proposal);
    } else if (!in.supervoxels.empty() && !in.graph.empty()) {
      prop = render_labels(SegmentationView{read_label_volume(in.supervoxels),
                                            SegGraph::from_json(read_json(in.graph))});
    } else {
      throw std::invalid_argument("evaluate needs --proposal or --supervoxels with --graph");
    }
  } catch (const std::exception& e) {
    throw StageError(Stage::load, e.what());
  }
  try {
    const json report = evaluation_report(contingency(gt, prop, include_background), include_background);
    emit(report, f.out, "evaluate.json");
    const std::string path =
        !csv.empty() ? csv : (f.out.empty() ? std::string() : (std::filesystem::path(f.out) / "per_object.csv").string());
    if (!path.empty()) {
      std::ofstream out(path, std::ios::binary);
      if (!out) throw std::runtime_error("cannot write " + path);
      out << per_object_csv(report);
    }
  } catch (const std::exception& e) {
    throw StageError(Stage::evaluate, e.what());
  }
  return 0;
}

int cmd_pr_curve(const Common& f, const std::string& input) {
  json j;
  try {
    j = read_json(input);
  } catch (const std::exception& e) {
    throw StageError(Stage::load, e.what());
  }
  try {
    const auto scores = j.at("scores").get<std::vector<double>>();
    const auto labels = j.at("labels").get<std::vector<std::uint8_t>>();
    json curve = json::array();
    for (const auto& p : pr_curve(scores, labels)) {
      curve.push_back({{"threshold", p.threshold}, {"precision", p.precision}, {"recall", p.recall}});
    }
    emit(curve, f.out, "pr_curve.json");
  } catch (const std::exception& e) {
    throw StageError(Stage::evaluate, e.what());
  }
  return 0;
}

int cmd_run(const Common& f) {
  if (f.config.empty()) throw StageError(Stage::config, "run needs --config");
  PipelineConfig c = load_pipeline_config(f.config);
  apply_flags(c, f);
  const RunReport r = run_pipeline(c);
  std::cout << dump_json(r.to_json()) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"segfix: error detection and correction for volumetric segmentations"};
  app.require_subcommand(1);

  Common f;
  Inputs in;
  std::string window, border, center, proposal, csv, input;
  bool include_background = false;

  auto* synth = app.add_subcommand("synth", "generate ground truth, supervoxels and a proposal");
  add_common(synth, f, false);
  auto* detect = app.add_subcommand("detect", "compute the combined error map of a proposal");
  add_common(detect, f, true);
  add_inputs(detect, in);
  detect->add_option("--window", window, "error window x,y,z");
  detect->add_option("--border", border, "valid | clipped");
  auto* correct = app.add_subcommand("correct", "run one corrector decision at a location");
  add_common(correct, f, true);
  add_inputs(correct, in);
  correct->add_option("--center", center, "location x,y,z")->required();
  auto* refine = app.add_subcommand("refine", "iterate detection and correction to convergence");
  add_common(refine, f, true);
  add_inputs(refine, in);
  auto* evaluate = app.add_subcommand("evaluate", "compare a proposal with ground truth");
  add_common(evaluate, f, false);
  add_inputs(evaluate, in);
  evaluate->add_option("--proposal", proposal, "proposal label volume");
  evaluate->add_flag("--include-background", include_background, "count background voxels");
  evaluate->add_option("--csv", csv, "per-object CSV path");
  auto* pr = app.add_subcommand("pr-curve", "precision and recall over score thresholds");
  add_common(pr, f, false);
  pr->add_option("--input", input, "JSON with scores and labels arrays")->required();
  auto* run = app.add_subcommand("run", "full pipeline from a config file");
  add_common(run, f, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : exit_code(Stage::config);
  }

  try {
    if (*synth) return cmd_synth(f);
    if (*detect) return cmd_detect(f, in, window, border);
    if (*correct) return cmd_correct(f, in, center);
    if (*refine) return cmd_refine(f, in);
    if (*evaluate) return cmd_evaluate(f, in, proposal, include_background, csv);
    if (*pr) return cmd_pr_curve(f, input);
    return cmd_run(f);
  } catch (const StageError& e) {
    spdlog::error("{}", e.what());
    return exit_code(e.stage());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return exit_code(Stage::config);
  }
}
