#include "segfix/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "segfix/metrics.hpp"

namespace segfix {

using json = nlohmann::json;

std::string to_string(Stage s) {
  switch (s) {
    case Stage::config: return "config";
    case Stage::load: return "load";
    case Stage::synth: return "synth";
    case Stage::detect: return "detect";
    case Stage::refine: return "refine";
    default: return "evaluate";
  }
}

int exit_code(Stage s) {
  switch (s) {
    case Stage::config: return 1;
    case Stage::load: return 2;
    case Stage::detect: return 3;
    case Stage::refine: return 4;
    case Stage::evaluate: return 5;
    default: return 6;
  }
}

BackendSpec BackendSpec::parse(const std::string& s) {
  BackendSpec b;
  if (s == "oracle") return b;
  auto number = [&](const std::string& t) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != t.size()) {
      throw std::invalid_argument("bad number '" + t + "' in backend '" + s + "'");
    }
    return v;
  };
  if (s.starts_with("noisy:")) {
    const std::string rest = s.substr(6);
    const auto comma = rest.find(',');
    if (comma == std::string::npos) {
      throw std::invalid_argument("noisy backend needs <fp>,<fn>: '" + s + "'");
    }
    b.kind = Kind::noisy;
    b.fp = number(rest.substr(0, comma));
    b.fn = number(rest.substr(comma + 1));
    return b;
  }
  if (s.starts_with("constant:")) {
    b.kind = Kind::constant;
    b.value = number(s.substr(9));
    return b;
  }
  throw std::invalid_argument("unknown backend '" + s + "'");
}

std::string BackendSpec::to_string() const {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  switch (kind) {
    case Kind::oracle: return "oracle";
    case Kind::noisy: return "noisy:" + num(fp) + "," + num(fn);
    default: return "constant:" + num(value);
  }
}

std::unique_ptr<DetectorBackend> make_detector(const BackendSpec& spec,
                                               std::shared_ptr<const LabelVolume> gt,
                                               const ErrorWindowSpec& window, std::uint64_t seed,
                                               int threads) {
  switch (spec.kind) {
    case BackendSpec::Kind::oracle:
      return std::make_unique<OracleDetector>(std::move(gt), window, threads);
    case BackendSpec::Kind::noisy:
      return std::make_unique<NoisyDetector>(std::move(gt), window, spec.fp, spec.fn, seed,
                                             threads);
    default:
      throw std::invalid_argument("detector backend must be oracle or noisy");
  }
}

std::unique_ptr<CorrectorBackend> make_corrector(const BackendSpec& spec,
                                                 std::shared_ptr<const LabelVolume> gt,
                                                 std::uint64_t seed) {
  switch (spec.kind) {
    case BackendSpec::Kind::oracle: return std::make_unique<OracleCorrector>(std::move(gt));
    case BackendSpec::Kind::noisy:
      return std::make_unique<NoisyCorrector>(std::move(gt), spec.fp, spec.fn, seed);
    default: return std::make_unique<ConstantCorrector>(spec.value);
  }
}

namespace {

Shape3 shape_of(const json& j) {
  const auto v = j.get<std::vector<int>>();
  if (v.size() != 3) throw std::invalid_argument("expected three dimensions");
  return Shape3(v[0], v[1], v[2]);
}

json shape_json(const Shape3& s) { return json::array({s.x, s.y, s.z}); }

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ErrorWindowSpec error_window_from_json(const json& j) {
  ErrorWindowSpec w;
  Shape3 shape = w.shape;
  BorderMode mode = w.mode;
  if (j.contains("shape")) shape = shape_of(j.at("shape"));
  if (j.contains("border")) mode = parse_border_mode(j.at("border").get<std::string>());
  return ErrorWindowSpec(shape, mode);
}

json to_json(const ErrorWindowSpec& w) {
  return json{{"shape", shape_json(w.shape)}, {"border", to_string(w.mode)}};
}

RefinementConfig refinement_config_from_json(const json& j) {
  RefinementConfig c;
  if (j.contains("corrector_window")) c.corrector_window = shape_of(j.at("corrector_window"));
  if (j.contains("corrector_border")) {
    c.corrector_border = parse_border_mode(j.at("corrector_border").get<std::string>());
  }
  if (j.contains("error_window")) c.error_window = error_window_from_json(j.at("error_window"));
  take(j, "threshold", c.threshold);
  take(j, "lo", c.lo);
  take(j, "hi", c.hi);
  take(j, "max_visits", c.max_visits);
  if (j.contains("order")) c.order = parse_location_order(j.at("order").get<std::string>());
  if (j.contains("visit_region")) {
    c.visit_region = parse_visit_region(j.at("visit_region").get<std::string>());
  }
  take(j, "seed", c.seed);
  c.validate();
  return c;
}

json to_json(const RefinementConfig& c) {
  return json{{"corrector_window", shape_json(c.corrector_window)},
              {"corrector_border", to_string(c.corrector_border)},
              {"error_window", to_json(c.error_window)},
              {"threshold", c.threshold},
              {"lo", c.lo},
              {"hi", c.hi},
              {"max_visits", c.max_visits},
              {"order", to_string(c.order)},
              {"visit_region", to_string(c.visit_region)},
              {"seed", c.seed}};
}

EvalPointConfig eval_point_config_from_json(const json& j) {
  EvalPointConfig c;
  if (j.contains("large")) c.large = error_window_from_json(j.at("large"));
  if (j.contains("small")) c.small = error_window_from_json(j.at("small"));
  if (j.contains("spacing")) c.spacing = shape_of(j.at("spacing"));
  if (j.contains("sampling_window")) c.sampling_window = shape_of(j.at("sampling_window"));
  take(j, "candidates", c.candidates);
  take(j, "seed", c.seed);
  return c;
}

json to_json(const EvalPointConfig& c) {
  return json{{"large", to_json(c.large)},
              {"small", to_json(c.small)},
              {"spacing", shape_json(c.spacing)},
              {"sampling_window", shape_json(c.sampling_window)},
              {"candidates", c.candidates},
              {"seed", c.seed}};
}

PipelineConfig PipelineConfig::parse(const std::string& text,
                                     const std::filesystem::path& base_dir) {
  PipelineConfig c;
  c.text = text;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    take(j, "seed", c.seed);
    take(j, "threads", c.threads);
    if (c.threads < 1) throw std::invalid_argument("threads must be >= 1");
    if (j.contains("detector")) c.detector = BackendSpec::parse(j.at("detector").get<std::string>());
    if (j.contains("corrector")) {
      c.corrector = BackendSpec::parse(j.at("corrector").get<std::string>());
    }
    if (c.detector.kind == BackendSpec::Kind::constant) {
      throw std::invalid_argument("detector backend must be oracle or noisy");
    }
    c.refine.seed = c.seed;
    if (j.contains("refine")) {
      json r = j.at("refine");
      if (!r.contains("seed")) r["seed"] = c.seed;
      c.refine = refinement_config_from_json(r);
    }
    auto resolve = [&](const json& obj, const char* key) -> std::filesystem::path {
      if (!obj.contains(key)) return {};
      std::filesystem::path p = obj.at(key).get<std::string>();
      return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    };
    if (j.contains("synth") && j.contains("input")) {
      throw std::invalid_argument("config has both 'synth' and 'input'");
    }
    if (j.contains("synth")) {
      const json& s = j.at("synth");
      c.synth = SynthConfig::from_json(s);
      if (!s.contains("seed")) c.synth->seed = c.seed;
      c.mutations.seed = c.synth->seed;
      if (s.contains("mutations")) {
        const json& m = s.at("mutations");
        take(m, "merges", c.mutations.merges);
        take(m, "splits", c.mutations.splits);
        take(m, "max_gap", c.mutations.max_gap);
        take(m, "seed", c.mutations.seed);
        if (m.contains("witness_window")) {
          c.mutations.witness_window = error_window_from_json(m.at("witness_window"));
        }
      }
    } else if (j.contains("input")) {
      const json& in = j.at("input");
      c.gt_path = resolve(in, "gt");
      c.supervoxels_path = resolve(in, "supervoxels");
      c.graph_path = resolve(in, "graph");
      c.raw_path = resolve(in, "raw");
      if (c.gt_path.empty() || c.supervoxels_path.empty() || c.graph_path.empty()) {
        throw std::invalid_argument("input needs gt, supervoxels and graph paths");
      }
    } else {
      throw std::invalid_argument("config needs 'synth' or 'input'");
    }
    if (j.contains("evaluate")) {
      const json& e = j.at("evaluate");
      take(e, "include_background", c.include_background);
      if (e.contains("points")) {
        json p = e.at("points");
        if (!p.contains("seed")) p["seed"] = c.seed;
        c.points = eval_point_config_from_json(p);
      }
    }
    if (j.contains("out")) c.out = resolve(j, "out");
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(Stage::config, e.what());
  }
  return c;
}

json PipelineConfig::effective() const {
  json j{{"seed", seed},
         {"threads", threads},
         {"detector", detector.to_string()},
         {"corrector", corrector.to_string()},
         {"refine", to_json(refine)},
         {"include_background", include_background}};
  if (synth) {
    json s = synth->to_json();
    s["mutations"] = {{"merges", mutations.merges},
                      {"splits", mutations.splits},
                      {"max_gap", mutations.max_gap},
                      {"seed", mutations.seed},
                      {"witness_window", to_json(mutations.witness_window)}};
    j["synth"] = std::move(s);
  } else {
    j["input"] = {{"gt", gt_path.string()},
                  {"supervoxels", supervoxels_path.string()},
                  {"graph", graph_path.string()},
                  {"raw", raw_path.string()}};
  }
  if (points) j["points"] = to_json(*points);
  return j;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StageError(Stage::config, "cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return PipelineConfig::parse(ss.str(), path.parent_path());
}

json RunReport::to_json(bool with_timing) const {
  json j = body;
  if (with_timing) j["timings"] = timings;
  return j;
}

namespace {

void dump_to(std::string& out, const json& j, int indent, int depth) {
  auto newline = [&](int d) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        out += json(it.key()).dump();
        out += indent < 0 ? ":" : ": ";
        dump_to(out, it.value(), indent, depth + 1);
      }
      newline(depth);
      out += '}';
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i > 0) out += ',';
        newline(depth + 1);
        dump_to(out, j[i], indent, depth + 1);
      }
      newline(depth);
      out += ']';
      return;
    }
    case json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) {
        out += "null";
        return;
      }
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out += buf;
      // keep floats recognisable as floats
      if (std::string_view(buf).find_first_of(".eEn") == std::string_view::npos) out += ".0";
      return;
    }
    default: out += j.dump();
  }
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

template <typename F>
auto in_stage(Stage stage, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

}  // namespace

std::string dump_json(const json& j, int indent) {
  std::string out;
  dump_to(out, j, indent, 0);
  return out;
}

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << dump_json(j) << '\n';
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return json::parse(in);
}

std::string per_object_csv(const json& evaluation) {
  std::string out = "gt,vi_split,vi_merge,vi,weight\n";
  char buf[160];
  for (const auto& o : evaluation.at("per_object")) {
    std::snprintf(buf, sizeof buf, "%llu,%.17g,%.17g,%.17g,%.17g\n",
                  static_cast<unsigned long long>(o.at("gt").get<Label>()),
                  o.at("vi_split").get<double>(), o.at("vi_merge").get<double>(),
                  o.at("vi").get<double>(), o.at("weight").get<double>());
    out += buf;
  }
  return out;
}

RunReport run_pipeline(const PipelineConfig& config) {
  RunReport report;
  json& body = report.body;
  body["config_echo"] = config.text;
  body["effective_config"] = config.effective();

  if (!config.out.empty()) {
    in_stage(Stage::config, [&] {
      std::filesystem::create_directories(config.out);
      return 0;
    });
  }
  auto artifact = [&](const char* name) { return config.out / name; };

  // Input.
  auto t = Clock::now();
  std::shared_ptr<const LabelVolume> gt;
  SegmentationView view;
  std::shared_ptr<const RawVolume> raw;
  std::vector<Mutation> mutations;
  if (config.synth) {
    in_stage(Stage::synth, [&] {
      SynthVolumes v = generate_gt(*config.synth);
      mutations = random_mutations(v.gt, v.supervoxels, config.mutations);
      view = inject_errors(v.gt, v.supervoxels, mutations);
      gt = std::make_shared<const LabelVolume>(std::move(v.gt));
      if (!config.out.empty()) {
        write_volume(*gt, artifact("gt.raw"));
        write_volume(view.supervoxels, artifact("supervoxels.raw"));
        write_json(view.graph.to_json(), artifact("proposal_graph.json"));
        json log = json::array();
        for (const auto& m : mutations) log.push_back(m.to_json());
        write_json(log, artifact("mutations.json"));
      }
      return 0;
    });
    report.timings["synth"] = seconds_since(t);
  } else {
    in_stage(Stage::load, [&] {
      gt = std::make_shared<const LabelVolume>(read_label_volume(config.gt_path));
      LabelVolume sv = read_label_volume(config.supervoxels_path);
      if (!(sv.shape() == gt->shape())) {
        throw std::invalid_argument("supervoxel and ground-truth volumes differ in shape");
      }
      view = SegmentationView{std::move(sv), SegGraph::from_json(read_json(config.graph_path))};
      if (!config.raw_path.empty()) {
        raw = std::make_shared<const RawVolume>(read_raw_volume(config.raw_path));
        if (!(raw->shape() == gt->shape())) {
          throw std::invalid_argument("raw volume differs in shape");
        }
      }
      for (Label l : view.supervoxels.data()) {
        if (l != 0 && !view.graph.has_vertex(l)) {
          throw std::invalid_argument("graph lacks supervoxel " + std::to_string(l));
        }
      }
      return 0;
    });
    report.timings["load"] = seconds_since(t);
  }
  const LabelVolume initial = render_labels(view);
  body["input"] = {{"shape", json::array({gt->shape().x, gt->shape().y, gt->shape().z})},
                   {"supervoxels", view.graph.vertex_count()},
                   {"initial_segments", view.graph.component_count()},
                   {"mutations", mutations.size()}};

  // Detect.
  t = Clock::now();
  const auto detector = in_stage(Stage::detect, [&] {
    return make_detector(config.detector, gt, config.refine.error_window, config.seed,
                         config.threads);
  });
  RefinementState state = in_stage(Stage::detect, [&] {
    return init_state(std::move(view), *detector, config.refine, raw);
  });
  std::size_t foreground = 0;
  for (Label l : initial.data()) foreground += l != 0;
  body["detect"] = {{"error_voxels", state.initial_error_voxels},
                    {"foreground_voxels", foreground},
                    {"error_fraction", foreground == 0 ? 0.0
                                                       : static_cast<double>(state.initial_error_voxels) /
                                                             static_cast<double>(foreground)}};
  if (!config.out.empty()) {
    in_stage(Stage::detect, [&] {
      write_volume(state.soft.values, artifact("error_map_initial.raw"));
      return 0;
    });
  }
  report.timings["detect"] = seconds_since(t);

  // Refine.
  t = Clock::now();
  const RefinementReport refined = in_stage(Stage::refine, [&] {
    const auto corrector = make_corrector(config.corrector, gt, config.seed);
    return run(state, *detector, *corrector, config.refine);
  });
  body["refine"] = refined.to_json(false);
  if (!config.out.empty()) {
    in_stage(Stage::refine, [&] {
      write_json(state.view.graph.to_json(), artifact("final_graph.json"));
      write_volume(state.segmentation, artifact("segmentation.raw"));
      return 0;
    });
  }
  report.timings["refine"] = seconds_since(t);

  // Evaluate.
  t = Clock::now();
  in_stage(Stage::evaluate, [&] {
    json eval;
    eval["include_background"] = config.include_background;
    eval["before"] =
        evaluation_report(contingency(*gt, initial, config.include_background), config.include_background);
    eval["after"] = evaluation_report(contingency(*gt, state.segmentation, config.include_background),
                                      config.include_background);
    if (!mutations.empty()) {
      std::vector<Point3> witnesses;
      for (const auto& m : mutations) witnesses.push_back(m.witness);
      const auto b = point_errors(*gt, initial, witnesses, config.mutations.witness_window);
      const auto a = point_errors(*gt, state.segmentation, witnesses, config.mutations.witness_window);
      const PointErrorCounts c = count_point_errors(b, a);
      eval["mutation_witnesses"] = {{"errors_before", c.errors_before},
                                    {"errors_after", c.errors_after},
                                    {"fixed", c.fixed},
                                    {"introduced", c.introduced}};
    }
    if (config.points) {
      const auto pts = select_eval_points(*gt, initial, *config.points);
      std::vector<Point3> where;
      std::vector<std::uint8_t> labels;
      for (const auto& p : pts) {
        where.push_back(p.point);
        labels.push_back(p.erroneous);
      }
      const auto small = make_detector(config.detector, gt, config.points->small, config.seed,
                                       config.threads);
      const ErrorMap scores_map = small->detect(initial, raw.get());
      std::vector<double> scores;
      for (const auto& p : where) scores.push_back(scores_map.at(p));
      json points{{"count", pts.size()}};
      std::size_t positives = 0;
      for (auto l : labels) positives += l;
      points["positives"] = positives;
      if (positives > 0) {
        json curve = json::array();
        for (const auto& c : pr_curve(scores, labels)) {
          curve.push_back({{"threshold", c.threshold}, {"precision", c.precision}, {"recall", c.recall}});
        }
        points["pr_curve"] = std::move(curve);
      }
      const auto after = point_errors(*gt, state.segmentation, where, config.points->small);
      const PointErrorCounts c = count_point_errors(labels, after);
      points["errors_before"] = c.errors_before;
      points["errors_after"] = c.errors_after;
      points["fixed"] = c.fixed;
      points["introduced"] = c.introduced;
      eval["points"] = std::move(points);
    }
    if (!config.out.empty()) {
      std::ofstream csv(artifact("per_object.csv"), std::ios::binary);
      if (!csv) throw std::runtime_error("cannot write per_object.csv");
      csv << per_object_csv(eval["after"]);
    }
    body["evaluate"] = std::move(eval);
    return 0;
  });
  report.timings["evaluate"] = seconds_since(t);
  report.timings["refine_loop"] = refined.wall_seconds;

  if (!config.out.empty()) {
    in_stage(Stage::evaluate, [&] {
      write_json(report.to_json(), artifact("report.json"));
      return 0;
    });
  }
  return report;
}

}  // namespace segfix
