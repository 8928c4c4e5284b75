#ifndef ADFA_PIPELINE_HPP_
#define ADFA_PIPELINE_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "adfa/io.hpp"
#include "adfa/loadings.hpp"
#include "adfa/moments.hpp"
#include "adfa/structure.hpp"

namespace adfa {

enum class StructureMode { kTree, kIndegree, kIndependent };
std::string to_string(StructureMode m);
StructureMode structure_mode_from_string(const std::string& s);

struct PipelineConfig {
  std::string data_path;
  std::string labels_path;   // optional latent labels (noise estimation)
  std::string anchors_path;
  std::string out_dir;       // where stage artifacts go; empty = do not persist
  std::size_t n_observed = 0;  // 0 = infer from the data
  std::vector<std::string> latent_names;  // empty = anchor file order

  std::size_t order = 2;  // K
  Constraint constraint = Constraint::kMarginal;
  double lambda_structure = 0.01;
  double lambda_loadings = 0.1;
  double gap_tol = 1e-4;
  std::size_t max_iters = 2000;

  StructureMode structure = StructureMode::kTree;
  std::size_t max_indegree = 2;
  ChowLiuMode chow_liu_mode = ChowLiuMode::kSpanningTree;

  FailureMethod failure_method = FailureMethod::kAuto;
  LeakMethod leak_method = LeakMethod::kAuto;
  bool prune = true;

  std::uint64_t seed = 0;
  std::size_t threads = 1;  // never affects results

  void validate() const;
  RecoveryConfig structure_recovery() const;
  RecoveryConfig loadings_recovery() const;
};

nlohmann::json config_to_json(const PipelineConfig& config);
PipelineConfig config_from_json(const nlohmann::json& doc);
// Hash of every result-affecting field (threads and out_dir excluded).
std::string config_fingerprint(const PipelineConfig& config);

// One filled-in anchor conditional and where it came from.
struct NoiseReport {
  std::string latent;
  std::size_t anchor = 0;
  std::string source;  // "given", "labels" or "triplet"
  AnchorConditional conditional;
  std::optional<std::size_t> second_anchor, third_view;
  double half_width_y1 = 0.0, half_width_y0 = 0.0;
};

// Fills every missing primary conditional.  Uses labels when the dataset has
// them, otherwise a triplet built from the first secondary anchor and the
// best third view.
std::vector<NoiseReport> complete_anchor_conditionals(AnchorSpec& spec, const BinaryDataset& data);

struct PipelineInputs {
  BinaryDataset data;
  VariableSpace space;
  AnchorMap anchors;
  std::vector<NoiseReport> noise;
};

PipelineInputs load_inputs(const PipelineConfig& config);

struct StructureStage {
  ScoredStructure structure;
  LatentNetwork latent;
};

RecoveredMoments run_moments_stage(const PipelineInputs& inputs, const PipelineConfig& config);
StructureStage run_structure_stage(const MomentSet& latent_moments, double n_samples, const PipelineConfig& config);
NoisyOrLoadings run_loadings_stage(const PipelineInputs& inputs, const LatentNetwork& latent,
                                   const PipelineConfig& config);

// Artifact documents carry the config fingerprint and the stage name.
nlohmann::json moments_artifact(const RecoveredMoments& moments, std::size_t rows, const PipelineConfig& config);
nlohmann::json structure_artifact(const StructureStage& stage, const VariableSpace& space,
                                  const PipelineConfig& config);
nlohmann::json model_artifact(const AdfaModel& model, const PipelineConfig& config);

struct PipelineResult {
  AdfaModel model;
  RecoveredMoments moments;
  StructureStage structure;
  std::vector<NoiseReport> noise;
};

// moments -> structure -> loadings.  With out_dir set, writes moments.json,
// structure.json and model.json there.
PipelineResult run_pipeline(const PipelineConfig& config);

}  // namespace adfa

#endif  // ADFA_PIPELINE_HPP_
