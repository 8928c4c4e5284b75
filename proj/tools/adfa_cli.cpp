#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

#include "adfa/error.hpp"
#include "adfa/evalem.hpp"
#include "adfa/io.hpp"
#include "adfa/pipeline.hpp"
#include "adfa/sampling.hpp"
#include "adfa/serialize.hpp"

using namespace adfa;

namespace {

int exit_code_for(const std::exception_ptr& ep) {
  try {
    std::rethrow_exception(ep);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConditioningError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
}

// Flags that map onto PipelineConfig.  Values from --config load first and
// explicitly given flags override them.
struct ConfigFlags {
  std::string config_file;
  PipelineConfig c;
  std::string constraint = "marginal", structure = "tree", chow_liu = "spanning-tree", failure = "auto",
              leak = "auto";
  std::string latent_names;
  bool no_prune = false;
  std::vector<std::pair<std::string, CLI::Option*>> opts;

  void add(CLI::App* app, bool needs_out_dir) {
    app->add_option("--config", config_file, "JSON pipeline config");
    auto reg = [&](const char* key, CLI::Option* o) { opts.emplace_back(key, o); };
    reg("data", app->add_option("--data", c.data_path, "sparse observation file"));
    reg("labels", app->add_option("--labels", c.labels_path, "sparse latent-label file (optional)"));
    reg("anchors", app->add_option("--anchors", c.anchors_path, "anchor file"));
    if (needs_out_dir) reg("out_dir", app->add_option("--out-dir", c.out_dir, "artifact directory"));
    reg("n_observed", app->add_option("--observed", c.n_observed, "number of observed variables (0 = infer)"));
    reg("latent_names", app->add_option("--latent-names", latent_names, "comma-separated latent order"));
    reg("order", app->add_option("--order,-K", c.order, "moment order K"));
    reg("constraint", app->add_option("--constraint", constraint, "simplex | local | marginal"));
    reg("lambda_structure", app->add_option("--lambda-structure", c.lambda_structure, "regularizer for P(Y)"));
    reg("lambda_loadings", app->add_option("--lambda-loadings", c.lambda_loadings, "regularizer for loadings"));
    reg("gap_tol", app->add_option("--gap-tol", c.gap_tol, "duality-gap tolerance"));
    reg("max_iters", app->add_option("--max-iters", c.max_iters, "conditional-gradient iteration cap"));
    reg("structure", app->add_option("--structure", structure, "tree | indegree | independent"));
    reg("max_indegree", app->add_option("--max-indegree", c.max_indegree, "parent bound for indegree search"));
    reg("chow_liu", app->add_option("--chow-liu", chow_liu, "spanning-tree | forest"));
    reg("failure_method", app->add_option("--failure-method", failure, "auto | direct | tree | blanket"));
    reg("leak_method", app->add_option("--leak-method", leak, "auto | quickscore | tree-bp | sampling"));
    reg("prune", app->add_flag("--no-prune", no_prune, "keep near-1 failures"));
    reg("seed", app->add_option("--seed", c.seed, "root seed"));
  }

  PipelineConfig resolve(std::size_t threads, bool check = true) const {
    PipelineConfig base = config_file.empty() ? PipelineConfig{} : config_from_json(read_json_file(config_file));
    auto given = [&](const std::string& key) {
      for (const auto& [k, o] : opts)
        if (k == key) return o->count() > 0;
      return false;
    };
    if (given("data")) base.data_path = c.data_path;
    if (given("labels")) base.labels_path = c.labels_path;
    if (given("anchors")) base.anchors_path = c.anchors_path;
    if (given("out_dir")) base.out_dir = c.out_dir;
    if (given("n_observed")) base.n_observed = c.n_observed;
    if (given("latent_names")) {
      base.latent_names.clear();
      std::stringstream ss(latent_names);
      for (std::string name; std::getline(ss, name, ',');)
        if (!name.empty()) base.latent_names.push_back(name);
    }
    if (given("order")) base.order = c.order;
    if (given("constraint")) base.constraint = constraint_from_string(constraint);
    if (given("lambda_structure")) base.lambda_structure = c.lambda_structure;
    if (given("lambda_loadings")) base.lambda_loadings = c.lambda_loadings;
    if (given("gap_tol")) base.gap_tol = c.gap_tol;
    if (given("max_iters")) base.max_iters = c.max_iters;
    if (given("structure")) base.structure = structure_mode_from_string(structure);
    if (given("max_indegree")) base.max_indegree = c.max_indegree;
    if (given("chow_liu")) base.chow_liu_mode = chow_liu == "forest" ? ChowLiuMode::kBicForest
                                               : chow_liu == "spanning-tree"
                                                   ? ChowLiuMode::kSpanningTree
                                                   : throw InvalidArgument("unknown Chow-Liu mode '" + chow_liu + "'");
    if (given("failure_method")) base.failure_method = failure_method_from_string(failure);
    if (given("leak_method")) base.leak_method = leak_method_from_string(leak);
    if (given("prune")) base.prune = !no_prune;
    if (given("seed")) base.seed = c.seed;
    base.threads = threads;
    if (check) base.validate();
    return base;
  }
};

std::string join_path(const std::string& dir, const char* name) { return (std::filesystem::path(dir) / name).string(); }

void require_out_dir(const PipelineConfig& c) {
  if (c.out_dir.empty()) throw InvalidArgument("--out-dir is required");
  std::filesystem::create_directories(c.out_dir);
}

void print_noise(const std::vector<NoiseReport>& noise, std::ostream& os) {
  os << "latent\tanchor\tsource\tp_a1_given_y1\tp_a1_given_y0\thalf_width_y1\thalf_width_y0\tsecond_anchor\tthird_view\n";
  os.precision(10);
  for (const auto& r : noise) {
    os << r.latent << '\t' << r.anchor << '\t' << r.source << '\t' << r.conditional.p1_given_1 << '\t'
       << r.conditional.p1_given_0 << '\t' << r.half_width_y1 << '\t' << r.half_width_y0 << '\t'
       << (r.second_anchor ? std::to_string(*r.second_anchor) : "-") << '\t'
       << (r.third_view ? std::to_string(*r.third_view) : "-") << '\n';
  }
}

BinaryDataset load_with_labels(const std::string& data, const std::string& labels, const AdfaModel& model) {
  if (labels.empty()) return parse_dataset(data, model.n_observed());
  return parse_dataset_with_labels(data, labels, model.n_observed(), model.m_latent());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn and evaluate noisy-or latent models from anchors"};
  app.require_subcommand(1);
  app.fallthrough();
  std::size_t threads = 1;
  app.add_option("--threads", threads, "worker threads for parallel loops")->check(CLI::PositiveNumber);

  // generate ------------------------------------------------------------------
  auto* gen = app.add_subcommand("generate", "sample a random model and a dataset from it");
  std::size_t g_m = 5, g_n = 20, g_rows = 10000, g_indeg = 2;
  std::string g_shape = "tree", g_out;
  std::uint64_t g_seed = 0;
  bool g_no_cond = false;
  gen->add_option("--latents", g_m, "number of latents")->check(CLI::PositiveNumber);
  gen->add_option("--observed", g_n, "number of observed variables")->check(CLI::PositiveNumber);
  gen->add_option("--rows", g_rows, "sample size")->check(CLI::PositiveNumber);
  gen->add_option("--structure", g_shape, "tree | indegree | independent");
  gen->add_option("--max-indegree", g_indeg, "parents per node for indegree structures");
  gen->add_option("--seed", g_seed, "root seed");
  gen->add_option("--out-dir", g_out, "output directory")->required();
  gen->add_flag("--no-conditionals", g_no_cond, "omit anchor conditionals from anchors.txt");

  // stages --------------------------------------------------------------------
  auto* mom = app.add_subcommand("moments", "recover latent moments from anchor moments");
  ConfigFlags mom_flags;
  mom_flags.add(mom, true);

  auto* st = app.add_subcommand("structure", "learn the latent network from recovered moments");
  std::string st_moments, st_out;
  std::size_t st_rows = 0;
  ConfigFlags st_flags;
  st_flags.add(st, true);
  st->add_option("--moments", st_moments, "moments.json from the moments stage")->required();
  st->add_option("--rows", st_rows, "sample size for BIC (default: from moments.json)");

  auto* ld = app.add_subcommand("loadings", "estimate noisy-or loadings for a learned network");
  std::string ld_structure;
  ConfigFlags ld_flags;
  ld_flags.add(ld, true);
  ld->add_option("--structure-file", ld_structure, "structure.json from the structure stage")->required();

  auto* learn = app.add_subcommand("learn", "run moments, structure and loadings");
  ConfigFlags learn_flags;
  learn_flags.add(learn, true);

  auto* noise = app.add_subcommand("noise-est", "estimate missing anchor conditionals");
  ConfigFlags noise_flags;
  noise_flags.add(noise, false);
  std::string noise_out;
  noise->add_option("--out", noise_out, "write the completed anchor file here");

  // em / eval -----------------------------------------------------------------
  auto* em = app.add_subcommand("em-refine", "Monte-Carlo EM refinement of the loadings");
  std::string em_model, em_data, em_out, em_trace;
  EmOptions em_opt;
  em->add_option("--model", em_model, "model.json")->required();
  em->add_option("--data", em_data, "sparse observation file")->required();
  em->add_option("--out", em_out, "refined model path")->required();
  em->add_option("--steps", em_opt.outer_steps, "outer EM steps");
  em->add_option("--burn-in", em_opt.burn_in, "Gibbs burn-in sweeps");
  em->add_option("--sweeps", em_opt.sweeps, "Gibbs sweeps per row");
  em->add_option("--samples", em_opt.samples, "samples kept per row");
  em->add_option("--seed", em_opt.seed, "root seed");
  em->add_option("--trace", em_trace, "write the per-step TSV trace here (default stdout)");

  auto* lt = app.add_subcommand("eval-lasttag", "top-1 accuracy at predicting a withheld positive latent");
  std::string lt_model, lt_data, lt_labels;
  std::uint64_t lt_seed = 0;
  lt->add_option("--model", lt_model, "model.json")->required();
  lt->add_option("--data", lt_data, "sparse observation file")->required();
  lt->add_option("--labels", lt_labels, "latent labels")->required();
  lt->add_option("--seed", lt_seed, "root seed");

  auto* ho = app.add_subcommand("eval-heldout", "mean held-out log-likelihood of latent labels");
  std::string ho_model, ho_data, ho_labels;
  ho->add_option("--model", ho_model, "model.json")->required();
  ho->add_option("--data", ho_data, "sparse observation file")->required();
  ho->add_option("--labels", ho_labels, "latent labels")->required();

  auto* ex = app.add_subcommand("export-edges", "export the latent edge list or the ranked loadings");
  std::string ex_structure, ex_moments, ex_model, ex_out;
  ex->add_option("--structure-file", ex_structure, "structure.json");
  ex->add_option("--moments", ex_moments, "moments.json (for edge MI and sign)");
  ex->add_option("--model", ex_model, "model.json; exports loadings instead");
  ex->add_option("--out", ex_out, "output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      ModelShape shape;
      shape.kind = g_shape == "tree"          ? StructureKind::kTree
                   : g_shape == "indegree"    ? StructureKind::kIndegree
                   : g_shape == "independent" ? StructureKind::kIndependent
                                              : throw InvalidArgument("unknown structure '" + g_shape + "'");
      shape.max_indegree = g_indeg;
      const AdfaModel model = random_model(g_m, g_n, shape, substream_seed(g_seed, "model"));
      const BinaryDataset data = sample_dataset(model, g_rows, substream_seed(g_seed, "data"));
      std::filesystem::create_directories(g_out);
      write_json_file(join_path(g_out, "model.json"), model_to_json(model));
      write_dataset(join_path(g_out, "data.txt"), data);
      write_labels(join_path(g_out, "labels.txt"), data);
      std::string anchors = format_anchors(model.anchors(), model.space().latent_names());
      if (g_no_cond) {
        std::ostringstream os;
        for (std::size_t i = 0; i < model.m_latent(); ++i)
          os << model.space().latent_names()[i] << ' ' << model.anchors().anchor_of(i) << '\n';
        anchors = os.str();
      }
      write_text_file(join_path(g_out, "anchors.txt"), anchors);
      std::cout << "wrote model.json, data.txt, labels.txt, anchors.txt to " << g_out << '\n';
    } else if (*mom) {
      const PipelineConfig c = mom_flags.resolve(threads);
      require_out_dir(c);
      const PipelineInputs in = load_inputs(c);
      const RecoveredMoments r = run_moments_stage(in, c);
      write_json_file(join_path(c.out_dir, "moments.json"), moments_artifact(r, in.data.rows(), c));
      if (!r.converged) std::cerr << "warning: moment recovery hit its iteration cap\n";
    } else if (*st) {
      const PipelineConfig c = st_flags.resolve(threads, false);
      require_out_dir(c);
      const Json doc = read_json_file(st_moments);
      const MomentSet moments = moments_from_json(doc);
      double rows = static_cast<double>(st_rows);
      if (st_rows == 0) {
        if (!doc.contains("rows")) throw InvalidArgument("moments file has no row count; pass --rows");
        rows = doc.at("rows").get<double>();
      }
      const StructureStage s = run_structure_stage(moments, rows, c);
      std::vector<std::string> names = c.latent_names;
      if (names.empty() && !c.anchors_path.empty()) names = parse_anchors(c.anchors_path).latents;
      if (names.empty()) {
        for (std::size_t i = 0; i < s.latent.size(); ++i) names.push_back("y" + std::to_string(i));
      }
      if (names.size() != s.latent.size()) throw InvalidArgument("latent names do not match the moments file");
      Json out = structure_to_json(s.structure, names, &s.latent);
      out["stage"] = "structure";
      out["config_fingerprint"] = config_fingerprint(c);
      write_json_file(join_path(c.out_dir, "structure.json"), out);
    } else if (*ld) {
      const PipelineConfig c = ld_flags.resolve(threads);
      require_out_dir(c);
      const PipelineInputs in = load_inputs(c);
      const Json doc = read_json_file(ld_structure);
      if (!doc.contains("latent")) throw InvalidArgument("structure file has no fitted network");
      const LatentNetwork latent = latent_from_json(doc.at("latent"));
      NoisyOrLoadings loadings = run_loadings_stage(in, latent, c);
      AnchorMap anchors = AnchorMap::from_loadings(loadings, in.anchors.anchors());
      const AdfaModel model(in.space, latent, std::move(loadings), std::move(anchors));
      write_json_file(join_path(c.out_dir, "model.json"), model_artifact(model, c));
    } else if (*learn) {
      const PipelineConfig c = learn_flags.resolve(threads);
      require_out_dir(c);
      const PipelineResult r = run_pipeline(c);
      if (!r.moments.converged) std::cerr << "warning: moment recovery hit its iteration cap\n";
      std::cout << "config_fingerprint\t" << config_fingerprint(c) << '\n'
                << "bic_score\t" << r.structure.structure.score << '\n';
    } else if (*noise) {
      const PipelineConfig c = noise_flags.resolve(threads);
      const PipelineInputs in = load_inputs(c);
      print_noise(in.noise, std::cout);
      if (!noise_out.empty()) write_text_file(noise_out, format_anchors(in.anchors, in.space.latent_names()));
    } else if (*em) {
      const AdfaModel model = model_from_json(read_json_file(em_model));
      const BinaryDataset data = parse_dataset(em_data, model.n_observed());
      em_opt.threads = threads;
      const EmResult r = em_refine(model, data, em_opt);
      write_json_file(em_out, model_to_json(r.model));
      std::ostringstream os;
      os.precision(12);
      os << "step\tloglik_before\tloglik_after\tmax_change\n";
      for (std::size_t s = 0; s < r.trace.size(); ++s)
        os << s << '\t' << r.trace[s].loglik_before << '\t' << r.trace[s].loglik_after << '\t' << r.trace[s].max_change
           << '\n';
      if (em_trace.empty()) std::cout << os.str();
      else write_text_file(em_trace, os.str());
    } else if (*lt) {
      const AdfaModel model = model_from_json(read_json_file(lt_model));
      const BinaryDataset data = load_with_labels(lt_data, lt_labels, model);
      const LastTagReport r = last_tag_accuracy(model, data, lt_seed, threads);
      std::cout << Json{{"evaluated", r.evaluated}, {"correct", r.correct}, {"accuracy", r.accuracy()}}.dump(2) << '\n';
    } else if (*ho) {
      const AdfaModel model = model_from_json(read_json_file(ho_model));
      const BinaryDataset data = load_with_labels(ho_data, ho_labels, model);
      const double ll = heldout_latent_loglik(model.latent(), data);
      std::cout << Json{{"rows", data.rows()}, {"mean_loglik", ll}}.dump(2) << '\n';
    } else if (*ex) {
      std::string text;
      if (!ex_model.empty()) {
        const AdfaModel model = model_from_json(read_json_file(ex_model));
        text = export_loadings(model.loadings(), model.space());
      } else {
        if (ex_structure.empty() || ex_moments.empty()) {
          throw InvalidArgument("export-edges needs --structure-file and --moments, or --model");
        }
        const Json sdoc = read_json_file(ex_structure);
        const ScoredStructure s = structure_from_json(sdoc);
        const auto names = sdoc.at("names").get<std::vector<std::string>>();
        text = export_edges(s, moments_from_json(read_json_file(ex_moments)), names);
      }
      if (ex_out.empty()) std::cout << text;
      else write_text_file(ex_out, text);
    }
  } catch (...) {
    return exit_code_for(std::current_exception());
  }
  return 0;
}
