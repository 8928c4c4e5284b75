#include "adfa/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <numeric>

#include "adfa/error.hpp"
#include "adfa/noise.hpp"
#include "adfa/sampling.hpp"
#include "adfa/serialize.hpp"

namespace adfa {

std::string to_string(StructureMode m) {
  switch (m) {
    case StructureMode::kTree:
      return "tree";
    case StructureMode::kIndegree:
      return "indegree";
    case StructureMode::kIndependent:
      return "independent";
  }
  return "tree";
}

StructureMode structure_mode_from_string(const std::string& s) {
  if (s == "tree") return StructureMode::kTree;
  if (s == "indegree") return StructureMode::kIndegree;
  if (s == "independent") return StructureMode::kIndependent;
  throw InvalidArgument("unknown structure mode '" + s + "' (tree, indegree, independent)");
}

namespace {

std::string to_string(ChowLiuMode m) { return m == ChowLiuMode::kBicForest ? "forest" : "spanning-tree"; }

ChowLiuMode chow_liu_mode_from_string(const std::string& s) {
  if (s == "spanning-tree") return ChowLiuMode::kSpanningTree;
  if (s == "forest") return ChowLiuMode::kBicForest;
  throw InvalidArgument("unknown Chow-Liu mode '" + s + "' (spanning-tree, forest)");
}

}  // namespace

void PipelineConfig::validate() const {
  if (data_path.empty()) throw InvalidArgument("no dataset path given");
  if (anchors_path.empty()) throw InvalidArgument("no anchor file given");
  if (order < 1) throw InvalidArgument("moment order K must be at least 1");
  switch (structure) {
    case StructureMode::kTree:
      if (order < 2) throw InvalidArgument("tree structure needs moment order K >= 2");
      break;
    case StructureMode::kIndegree:
      if (max_indegree < 1) throw InvalidArgument("max_indegree must be at least 1");
      if (order < max_indegree + 1) {
        throw InvalidArgument("indegree-" + std::to_string(max_indegree) + " structure needs moment order K >= " +
                              std::to_string(max_indegree + 1));
      }
      break;
    case StructureMode::kIndependent:
      break;
  }
  if (!(lambda_structure >= 0.0) || !(lambda_loadings >= 0.0)) throw InvalidArgument("lambda must be nonnegative");
  if (!(gap_tol > 0.0)) throw InvalidArgument("gap_tol must be positive");
  if (max_iters < 1) throw InvalidArgument("max_iters must be at least 1");
  if (threads < 1) throw InvalidArgument("threads must be at least 1");
  std::vector<std::string> names(latent_names);
  std::sort(names.begin(), names.end());
  if (std::adjacent_find(names.begin(), names.end()) != names.end()) throw InvalidArgument("latent names repeat");
}

RecoveryConfig PipelineConfig::structure_recovery() const {
  RecoveryConfig rc;
  rc.constraint = constraint;
  rc.lambda = lambda_structure;
  rc.gap_tol = gap_tol;
  rc.max_iters = max_iters;
  return rc;
}

RecoveryConfig PipelineConfig::loadings_recovery() const {
  RecoveryConfig rc;
  rc.constraint = Constraint::kSimplex;
  rc.lambda = lambda_loadings;
  rc.gap_tol = gap_tol;
  rc.max_iters = max_iters;
  return rc;
}

nlohmann::json config_to_json(const PipelineConfig& c) {
  return Json{{"data", c.data_path},
              {"labels", c.labels_path},
              {"anchors", c.anchors_path},
              {"out_dir", c.out_dir},
              {"n_observed", c.n_observed},
              {"latent_names", c.latent_names},
              {"order", c.order},
              {"constraint", to_string(c.constraint)},
              {"lambda_structure", c.lambda_structure},
              {"lambda_loadings", c.lambda_loadings},
              {"gap_tol", c.gap_tol},
              {"max_iters", c.max_iters},
              {"structure", to_string(c.structure)},
              {"max_indegree", c.max_indegree},
              {"chow_liu", to_string(c.chow_liu_mode)},
              {"failure_method", to_string(c.failure_method)},
              {"leak_method", to_string(c.leak_method)},
              {"prune", c.prune},
              {"seed", c.seed},
              {"threads", c.threads}};
}

PipelineConfig config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw InvalidArgument("config must be a JSON object");
  PipelineConfig c;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "data") c.data_path = value.get<std::string>();
      else if (key == "labels") c.labels_path = value.get<std::string>();
      else if (key == "anchors") c.anchors_path = value.get<std::string>();
      else if (key == "out_dir") c.out_dir = value.get<std::string>();
      else if (key == "n_observed") c.n_observed = value.get<std::size_t>();
      else if (key == "latent_names") c.latent_names = value.get<std::vector<std::string>>();
      else if (key == "order") c.order = value.get<std::size_t>();
      else if (key == "constraint") c.constraint = constraint_from_string(value.get<std::string>());
      else if (key == "lambda_structure") c.lambda_structure = value.get<double>();
      else if (key == "lambda_loadings") c.lambda_loadings = value.get<double>();
      else if (key == "gap_tol") c.gap_tol = value.get<double>();
      else if (key == "max_iters") c.max_iters = value.get<std::size_t>();
      else if (key == "structure") c.structure = structure_mode_from_string(value.get<std::string>());
      else if (key == "max_indegree") c.max_indegree = value.get<std::size_t>();
      else if (key == "chow_liu") c.chow_liu_mode = chow_liu_mode_from_string(value.get<std::string>());
      else if (key == "failure_method") c.failure_method = failure_method_from_string(value.get<std::string>());
      else if (key == "leak_method") c.leak_method = leak_method_from_string(value.get<std::string>());
      else if (key == "prune") c.prune = value.get<bool>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "threads") c.threads = value.get<std::size_t>();
      else throw InvalidArgument("unknown config field '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("config field has the wrong type: ") + e.what());
  }
  return c;
}

std::string config_fingerprint(const PipelineConfig& config) {
  Json doc = config_to_json(config);
  doc.erase("threads");
  doc.erase("out_dir");
  return fingerprint(doc);
}

std::vector<NoiseReport> complete_anchor_conditionals(AnchorSpec& spec, const BinaryDataset& data) {
  std::vector<NoiseReport> out;
  std::vector<std::size_t> all_anchors;
  for (std::size_t i = 0; i < spec.primary.size(); ++i) {
    all_anchors.push_back(spec.primary[i].observed);
    for (std::size_t s : spec.secondary[i]) all_anchors.push_back(s);
  }
  for (std::size_t i = 0; i < spec.primary.size(); ++i) {
    auto& a = spec.primary[i];
    NoiseReport rep;
    rep.latent = a.latent;
    rep.anchor = a.observed;
    try {
      if (a.conditional) {
        rep.source = "given";
      } else if (data.has_latent()) {
        const SinglyLabeledEstimate est = singly_labeled_estimate(data, i, a.observed);
        a.conditional = est.conditional;
        rep.source = "labels";
        rep.half_width_y1 = est.half_width_y1;
        rep.half_width_y0 = est.half_width_y0;
      } else if (!spec.secondary[i].empty()) {
        const std::size_t w2 = spec.secondary[i].front();
        const std::size_t x = pick_third_view(data, a.observed, w2, all_anchors);
        const TripletParams p = triplet_decompose(empirical_triplet(data, a.observed, w2, x));
        a.conditional = p.w1;
        rep.source = "triplet";
        rep.second_anchor = w2;
        rep.third_view = x;
      } else {
        throw PreconditionError("no conditional, no labels and no second anchor to estimate one from");
      }
    } catch (const Error&) {
      rethrow_with_context("anchor of latent '" + a.latent + "' (observed " + std::to_string(a.observed) + ")");
    }
    rep.conditional = *a.conditional;
    out.push_back(std::move(rep));
  }
  return out;
}

PipelineInputs load_inputs(const PipelineConfig& config) {
  config.validate();
  AnchorSpec spec = parse_anchors(config.anchors_path, config.n_observed);
  if (!config.latent_names.empty()) spec = align_anchors(spec, config.latent_names);
  const std::size_t m = spec.latents.size();
  BinaryDataset data = config.labels_path.empty()
                           ? parse_dataset(config.data_path, config.n_observed)
                           : parse_dataset_with_labels(config.data_path, config.labels_path, config.n_observed, m);
  for (const auto& a : spec.primary)
    if (a.observed >= data.n_observed()) {
      throw InvalidArgument("anchor of latent '" + a.latent + "' is outside the dataset's " +
                            std::to_string(data.n_observed()) + " columns");
    }
  std::vector<NoiseReport> noise = complete_anchor_conditionals(spec, data);

  std::vector<std::string> obs_names(data.n_observed());
  for (std::size_t j = 0; j < obs_names.size(); ++j) obs_names[j] = "x" + std::to_string(j);
  VariableSpace space(std::move(obs_names), spec.latents);
  return PipelineInputs{std::move(data), std::move(space), anchor_map(spec), std::move(noise)};
}

namespace {

std::vector<VarId> latent_ids(const VariableSpace& space) {
  std::vector<VarId> ids(space.m_latent());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = space.latent_id(i);
  return ids;
}

}  // namespace

RecoveredMoments run_moments_stage(const PipelineInputs& inputs, const PipelineConfig& config) {
  try {
    const std::vector<VarId> targets = latent_ids(inputs.space);
    std::vector<VarId> sources = source_ids(inputs.anchors, inputs.space, targets);
    std::sort(sources.begin(), sources.end());
    const MomentSet source = empirical_moment_set(inputs.data, make_layout(sources, config.order));
    return recover_moments(source, targets, config.order, inputs.anchors, inputs.space, config.structure_recovery(),
                           config.threads);
  } catch (const Error&) {
    rethrow_with_context("moments stage");
  }
}

StructureStage run_structure_stage(const MomentSet& latent_moments, double n_samples, const PipelineConfig& config) {
  try {
    ScoredStructure s;
    switch (config.structure) {
      case StructureMode::kTree:
        s = chow_liu(latent_moments, n_samples, config.chow_liu_mode);
        break;
      case StructureMode::kIndegree:
        s = exact_search(latent_moments, n_samples, config.max_indegree);
        break;
      case StructureMode::kIndependent:
        s = bic_score(latent_moments, ParentSets(latent_moments.layout().vars().size()), n_samples);
        break;
    }
    LatentNetwork latent = fit_cpts(latent_moments, s.parents);
    return StructureStage{std::move(s), std::move(latent)};
  } catch (const Error&) {
    rethrow_with_context("structure stage");
  }
}

NoisyOrLoadings run_loadings_stage(const PipelineInputs& inputs, const LatentNetwork& latent,
                                   const PipelineConfig& config) {
  try {
    const JointOracle oracle =
        recovered_joint_oracle(inputs.data, inputs.anchors, inputs.space, config.loadings_recovery());
    LoadingsOptions opt;
    opt.failure_method = config.failure_method;
    opt.leak_method = config.leak_method;
    opt.prune = config.prune;
    opt.seed = substream_seed(config.seed, "loadings");
    opt.threads = config.threads;
    return estimate_loadings(oracle, latent, inputs.anchors, inputs.space, opt);
  } catch (const Error&) {
    rethrow_with_context("loadings stage");
  }
}

nlohmann::json moments_artifact(const RecoveredMoments& moments, std::size_t rows, const PipelineConfig& config) {
  Json doc = moments_to_json(moments.moments);
  doc["rows"] = rows;
  doc["converged"] = moments.converged;
  doc["objective_trace"] = moments.objective_trace;
  doc["stage"] = "moments";
  doc["config_fingerprint"] = config_fingerprint(config);
  return doc;
}

nlohmann::json structure_artifact(const StructureStage& stage, const VariableSpace& space,
                                  const PipelineConfig& config) {
  Json doc = structure_to_json(stage.structure, space.latent_names(), &stage.latent);
  doc["stage"] = "structure";
  doc["config_fingerprint"] = config_fingerprint(config);
  return doc;
}

nlohmann::json model_artifact(const AdfaModel& model, const PipelineConfig& config) {
  Json doc = model_to_json(model);
  doc["stage"] = "loadings";
  doc["config_fingerprint"] = config_fingerprint(config);
  return doc;
}

PipelineResult run_pipeline(const PipelineConfig& config) {
  PipelineInputs inputs = load_inputs(config);
  if (!config.out_dir.empty()) std::filesystem::create_directories(config.out_dir);
  auto out_path = [&](const char* name) { return (std::filesystem::path(config.out_dir) / name).string(); };

  RecoveredMoments moments = run_moments_stage(inputs, config);
  if (!config.out_dir.empty()) {
    write_json_file(out_path("moments.json"), moments_artifact(moments, inputs.data.rows(), config));
  }
  StructureStage structure =
      run_structure_stage(moments.moments, static_cast<double>(inputs.data.rows()), config);
  if (!config.out_dir.empty()) {
    write_json_file(out_path("structure.json"), structure_artifact(structure, inputs.space, config));
  }
  NoisyOrLoadings loadings = run_loadings_stage(inputs, structure.latent, config);
  // Rebuilt from the loadings so that clamping of extreme anchor failures
  // cannot leave the two out of step.
  AnchorMap anchors = AnchorMap::from_loadings(loadings, inputs.anchors.anchors());
  AdfaModel model(inputs.space, structure.latent, std::move(loadings), std::move(anchors));
  if (!config.out_dir.empty()) write_json_file(out_path("model.json"), model_artifact(model, config));
  return PipelineResult{std::move(model), std::move(moments), std::move(structure), std::move(inputs.noise)};
}

}  // namespace adfa
