#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "latentlin/latentlin.hpp"

namespace fs = std::filesystem;
using namespace latentlin;

namespace {

std::vector<NoiseFamily> parse_families(const std::vector<std::string>& names) {
  std::vector<NoiseFamily> out;
  for (const auto& n : names) out.push_back(noise_family_from_string(n));
  return out;
}

std::string out_path(const std::string& dir, const std::string& name) {
  fs::create_directories(dir);
  return (fs::path(dir) / name).string();
}

void emit_json(const Json& j, const std::string& path) {
  if (path.empty() || path == "-")
    std::cout << j.dump(2) << '\n';
  else
    write_json_file(path, j);
}

Json ordering_json(const std::vector<Index>& ord) { return Json(ord); }

Json recovery_diagnostics(const RecoveryResult& r) {
  Json j;
  j["skipped_rows"] = r.diagnostics.skipped_rows;
  j["unconverged"] = r.diagnostics.unconverged;
  j["uncertified"] = r.diagnostics.uncertified;
  j["total_iterations"] = r.diagnostics.total_iterations;
  Json sel = Json::array();
  for (Index s : r.selection) {
    const CandidateInfo& c = r.candidate_pool[static_cast<std::size_t>(s)];
    sel.push_back({{"row", c.row}, {"sparsity", c.sparsity}, {"objective", c.objective}});
  }
  j["selected"] = sel;
  return j;
}

Json partition_json(const PartitionSearch& ps) {
  Json j;
  j["blocks"] = Json::array();
  for (const auto& b : ps.partition.blocks) j["blocks"].push_back(b);
  j["score"] = ps.score;
  j["trial"] = ps.trial;
  j["failed_trials"] = ps.failed_trials;
  return j;
}

/// Model JSON with "level_sizes" is a hierarchy; otherwise a single-view or
/// multi-view latent linear model.
bool is_hierarchy(const Json& j) { return j.contains("level_sizes"); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn latent linear models from observed moments"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a planted model and optionally samples");
  std::string synth_kind = "bn";
  Index s_n = 30, s_k = 5, s_samples = 0;
  double s_p = 0.3, s_gamma = 0.5, s_lambda_p = 0.3;
  std::vector<Index> s_levels{3, 12, 40};
  std::vector<std::string> s_families{"exponential", "poisson", "chi-squared"};
  std::uint64_t s_seed = 0;
  std::string s_out = ".";
  synth->add_option("--kind", synth_kind, "bn or hier")->check(CLI::IsMember({"bn", "hier"}));
  synth->add_option("-n", s_n, "observed nodes");
  synth->add_option("-k", s_k, "hidden nodes");
  synth->add_option("--p", s_p, "support density of A");
  synth->add_option("--gamma", s_gamma, "row gap");
  synth->add_option("--lambda-p", s_lambda_p, "edge density of Lambda (0 for independent hidden nodes)");
  synth->add_option("--levels", s_levels, "level sizes for --kind hier");
  synth->add_option("--families", s_families, "noise families");
  synth->add_option("--samples", s_samples, "number of samples to draw (0: model only)");
  synth->add_option("--seed", s_seed);
  synth->add_option("--out-dir", s_out);

  // estimate
  auto* estimate = app.add_subcommand("estimate", "second moment of a sample CSV");
  std::string e_samples, e_out = ".";
  Index e_max_rank = 0;
  estimate->add_option("--samples", e_samples)->required();
  estimate->add_option("--estimate-rank", e_max_rank, "report an eigen-gap rank estimate up to this value");
  estimate->add_option("--out-dir", e_out);

  // decompose
  auto* decompose = app.add_subcommand("decompose", "split a covariance into low-rank and diagonal parts");
  std::string d_pairs, d_out = ".";
  Index d_k = 0, d_trials = 100;
  std::uint64_t d_seed = 0;
  decompose->add_option("--pairs", d_pairs)->required();
  decompose->add_option("-k", d_k)->required();
  decompose->add_option("--trials", d_trials);
  decompose->add_option("--seed", d_seed);
  decompose->add_option("--out-dir", d_out);

  // recover
  auto* recover = app.add_subcommand("recover", "recover the coefficient matrix from a low-rank moment");
  std::string r_pairs, r_out = ".", r_variant = "alg1";
  Index r_k = 0;
  double r_eps = 1e-6;
  recover->add_option("--pairs", r_pairs)->required();
  recover->add_option("-k", r_k)->required();
  recover->add_option("--variant", r_variant)->check(CLI::IsMember({"alg1", "alg1_proj"}));
  recover->add_option("--eps-zero", r_eps);
  recover->add_option("--out-dir", r_out);

  // learn-bn
  auto* learn_bn = app.add_subcommand("learn-bn", "learn A and Lambda of a latent Bayesian network");
  std::string b_samples, b_model, b_out = ".", b_eca = "power", b_variant = "alg1";
  Index b_k = 0, b_trials = 100;
  std::uint64_t b_seed = 0;
  auto* b_samples_opt = learn_bn->add_option("--samples", b_samples, "sample CSV");
  auto* b_model_opt = learn_bn->add_option("--model", b_model, "model JSON (exact moments)");
  b_samples_opt->excludes(b_model_opt);
  learn_bn->add_option("-k", b_k, "hidden nodes (taken from the model when given)");
  learn_bn->add_option("--eca", b_eca)->check(CLI::IsMember({"power", "svd"}));
  learn_bn->add_option("--variant", b_variant)->check(CLI::IsMember({"alg1", "alg1_proj"}));
  learn_bn->add_option("--trials", b_trials);
  learn_bn->add_option("--seed", b_seed);
  learn_bn->add_option("--out-dir", b_out);

  // learn-hier
  auto* learn_hier = app.add_subcommand("learn-hier", "peel a hierarchical model level by level");
  std::string h_samples, h_model, h_out = ".", h_variant = "alg1";
  std::vector<Index> h_levels;
  Index h_trials = 100;
  std::uint64_t h_seed = 0;
  auto* h_samples_opt = learn_hier->add_option("--samples", h_samples, "sample CSV of the deepest level");
  auto* h_model_opt = learn_hier->add_option("--model", h_model, "hierarchy JSON (exact moments)");
  h_samples_opt->excludes(h_model_opt);
  learn_hier->add_option("--levels", h_levels, "level sizes, top first");
  learn_hier->add_option("--variant", h_variant)->check(CLI::IsMember({"alg1", "alg1_proj"}));
  learn_hier->add_option("--trials", h_trials);
  learn_hier->add_option("--seed", h_seed);
  learn_hier->add_option("--out-dir", h_out);

  // verify
  auto* verify = app.add_subcommand("verify", "check identifiability conditions of a model");
  std::string v_model, v_out;
  Index v_trials = 1000;
  std::uint64_t v_seed = 0;
  verify->add_option("--model", v_model)->required();
  verify->add_option("--trials", v_trials, "samples for the randomized falsifiers");
  verify->add_option("--seed", v_seed);
  verify->add_option("--out", v_out, "report path (stdout when omitted)");

  // experiment
  auto* experiment = app.add_subcommand("experiment", "run a synthetic benchmark");
  std::string x_which, x_config, x_preset = "reduced", x_out, x_scatter;
  bool x_exact = false;
  experiment->add_option("which", x_which)->required()->check(CLI::IsMember({"example1", "example2"}));
  experiment->add_option("--config", x_config, "JSON config overriding the preset");
  experiment->add_option("--preset", x_preset)->check(CLI::IsMember({"reduced", "paper"}));
  experiment->add_flag("--exact", x_exact, "population moments instead of samples");
  experiment->add_option("--out", x_out, "report JSON (stdout when omitted)");
  experiment->add_option("--scatter", x_scatter, "scatter CSV");

  // metrics
  auto* metrics = app.add_subcommand("metrics", "compare an estimated matrix with the truth");
  std::string m_truth, m_est, m_out;
  double m_eps = 1e-6;
  metrics->add_option("--truth", m_truth)->required();
  metrics->add_option("--estimate", m_est)->required();
  metrics->add_option("--eps-zero", m_eps);
  metrics->add_option("--out", m_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synth) {
      const auto fams = parse_families(s_families);
      if (synth_kind == "bn") {
        const Matrix a = gen_planted_coefficients(s_n, s_k, s_p, s_gamma, mix_seed(s_seed, 1));
        const Matrix lam = s_lambda_p > 0 ? gen_lower_triangular_dag(s_k, s_lambda_p, mix_seed(s_seed, 2))
                                          : Matrix::Zero(s_k, s_k);
        const LatentLinearModel model(CoefficientMatrix(a), DagMatrix(lam), gen_noise(s_k, fams, mix_seed(s_seed, 3)),
                                      gen_noise(s_n, fams, mix_seed(s_seed, 4)));
        write_json_file(out_path(s_out, "model.json"), model_to_json(model));
        write_csv_file(out_path(s_out, "A.csv"), a);
        if (s_samples > 0)
          write_csv_file(out_path(s_out, "samples.csv"), sample_single_view(model, s_samples, mix_seed(s_seed, 5)));
      } else {
        const HierarchicalModel hm = gen_hierarchy(s_levels, s_p, s_gamma, fams, s_seed);
        write_json_file(out_path(s_out, "model.json"), hierarchy_to_json(hm));
        if (s_samples > 0)
          write_csv_file(out_path(s_out, "samples.csv"), sample_hierarchical(hm, s_samples, mix_seed(s_seed, 5)));
      }
    } else if (*estimate) {
      const Matrix x = read_csv_file(e_samples);
      const Matrix pairs = empirical_pairs(x);
      write_csv_file(out_path(e_out, "pairs.csv"), pairs);
      if (e_max_rank > 0) emit_json({{"rank_estimate", estimate_rank_eigengap(pairs, e_max_rank)}}, out_path(e_out, "rank.json"));
    } else if (*decompose) {
      const Matrix c = read_csv_file(d_pairs);
      const PartitionSearch ps = find_partition(c, d_k, d_trials, d_seed);
      write_csv_file(out_path(d_out, "lowrank.csv"), ps.decomposition.lowrank);
      Matrix diag(ps.decomposition.diag.size(), 1);
      diag.col(0) = ps.decomposition.diag;
      write_csv_file(out_path(d_out, "diag.csv"), diag, {"d"});
      write_json_file(out_path(d_out, "partition.json"), partition_json(ps));
    } else if (*recover) {
      const Matrix p = read_csv_file(r_pairs);
      RecoveryOptions opts;
      opts.eps_zero = r_eps;
      const RecoveryResult r = variant_from_string(r_variant) == RecoveryVariant::Alg1 ? alg1(p, r_k, opts)
                                                                                      : alg1_proj(p, r_k, opts);
      write_csv_file(out_path(r_out, "A_hat.csv"), r.a_hat);
      write_json_file(out_path(r_out, "diagnostics.json"), recovery_diagnostics(r));
    } else if (*learn_bn) {
      MomentSet ms;
      Index k = b_k;
      if (!b_model.empty()) {
        const LatentLinearModel model = model_from_json(read_json_file(b_model));
        ms = population_moments(model);
        k = model.k();
      } else if (!b_samples.empty()) {
        ms = empirical_moments(read_csv_file(b_samples));
      } else {
        throw CLI::RequiredError("--samples or --model");
      }
      if (k < 1) throw CLI::RequiredError("-k");
      PipelineOptions po;
      po.eca = b_eca == "svd" ? EcaMethod::Svd : EcaMethod::Power;
      po.recovery = variant_from_string(b_variant);
      po.partition_trials = b_trials;
      const BnResult bn = learn_bn_pipeline(ms, k, b_seed, po);
      write_csv_file(out_path(b_out, "A_hat.csv"), bn.a_hat);
      write_csv_file(out_path(b_out, "lambda_hat.csv"), bn.lambda.matrix());
      write_json_file(out_path(b_out, "ordering.json"), ordering_json(bn.lambda.ordering()));
      Json diag;
      diag["approximate_ordering"] = bn.approximate_ordering;
      diag["eca_converged"] = bn.eca_converged;
      diag["eca_sweeps"] = bn.eca.sweeps;
      diag["eca_retries"] = bn.eca.retries;
      diag["recovery"] = recovery_diagnostics(bn.recovery);
      if (bn.partition) diag["partition"] = partition_json(*bn.partition);
      write_json_file(out_path(b_out, "diagnostics.json"), diag);
    } else if (*learn_hier) {
      Matrix pairs;
      std::vector<Index> levels = h_levels;
      if (!h_model.empty()) {
        const HierarchicalModel hm = hierarchy_from_json(read_json_file(h_model));
        pairs = hm.observed_covariance();
        if (levels.empty()) levels = hm.level_sizes;
      } else if (!h_samples.empty()) {
        pairs = empirical_pairs(read_csv_file(h_samples));
      } else {
        throw CLI::RequiredError("--samples or --model");
      }
      if (levels.size() < 2) throw CLI::RequiredError("--levels");
      HierOptions ho;
      ho.partition_trials = h_trials;
      ho.variant = variant_from_string(h_variant);
      const HierResult hr = learn_hierarchy(pairs, levels, h_seed, ho);
      for (std::size_t i = 0; i < hr.a_hats.size(); ++i)
        write_csv_file(out_path(h_out, "A" + std::to_string(i + 1) + ".csv"), hr.a_hats[i]);
      write_csv_file(out_path(h_out, "top_moment.csv"), top_level_moment(hr));
      Json parts = Json::array();
      for (const auto& ps : hr.partitions) parts.push_back(partition_json(ps));
      write_json_file(out_path(h_out, "partitions.json"), parts);
    } else if (*verify) {
      const Json mj = read_json_file(v_model);
      std::vector<Matrix> mats;
      if (is_hierarchy(mj))
        mats = hierarchy_from_json(mj).matrices;
      else
        mats.push_back(model_from_json(mj).a.matrix());
      Json report = Json::array();
      for (std::size_t m = 0; m < mats.size(); ++m) {
        const Matrix& a = mats[m];
        const Support sup = support_of(a);
        Json r;
        r["matrix"] = m + 1;
        r["d_max"] = max_hidden_degree(sup);
        if (a.cols() <= 24) {
          const ExpansionReport ex = check_expansion(sup);
          r["expansion"] = {{"holds", ex.holds}, {"witness", ex.witness}, {"neighbors", ex.neighbors}, {"exact", true}};
        } else {
          const SampledExpansionReport ex = check_expansion_sampled(sup, v_trials, v_seed);
          r["expansion"] = {{"falsified", ex.falsified}, {"witness", ex.witness}, {"neighbors", ex.neighbors}, {"exact", false}};
        }
        try {
          const GenericityReport g = check_genericity(a);
          r["genericity"] = {{"holds", g.holds}, {"hidden", g.hidden}, {"observed", g.observed}};
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::TooLarge) throw;
          r["genericity"] = {{"skipped", e.detail()}};
        }
        const auto rows = falsify_thm2_conditions(a, row_gaps(a), v_trials, v_seed);
        Json violated = Json::array();
        for (const auto& rr : rows)
          if (rr.cond_i_violated || rr.cond_ii_violated)
            violated.push_back({{"row", rr.row}, {"condition_i", rr.cond_i_violated}, {"condition_ii", rr.cond_ii_violated}});
        r["row_conditions"] = {{"violated_rows", violated}, {"rows_checked", rows.size()}};
        const auto cert = l1_recoverable_columns(a);
        r["l1_certified_columns"] = cert;
        report.push_back(r);
      }
      emit_json(report, v_out);
    } else if (*experiment) {
      ExperimentConfig cfg;
      if (x_which == "example1")
        cfg = x_preset == "paper" ? example1_paper() : example1_reduced();
      else
        cfg = x_preset == "paper" ? example2_paper() : example2_reduced();
      if (!x_config.empty()) cfg = config_from_json(read_json_file(x_config), cfg);
      if (x_exact) cfg.exact_moments = true;
      const Report rep = x_which == "example1" ? run_example1(cfg) : run_example2(cfg);
      Json out;
      out["config"] = config_to_json(cfg);
      out["rows"] = report_to_json(rep);
      emit_json(out, x_out);
      if (!x_scatter.empty()) {
        std::ofstream f(x_scatter);
        if (!f) throw Error(ErrorKind::ParseError, "cannot write " + x_scatter);
        write_scatter_csv(f, rep.scatter);
      }
    } else if (*metrics) {
      const Matrix a = read_csv_file(m_truth);
      const Matrix a_hat = read_csv_file(m_est);
      const SupportScores s = support_precision_recall(a, a_hat, m_eps);
      const Json params = {{"truth", m_truth}, {"estimate", m_est}, {"eps_zero", m_eps}};
      Json rows = Json::array();
      rows.push_back({{"metric", "dist"}, {"value", dist(a, a_hat)}, {"params", params}});
      rows.push_back({{"metric", "precision"}, {"value", s.precision ? Json(*s.precision) : Json(nullptr)}, {"params", params}});
      rows.push_back({{"metric", "recall"}, {"value", s.recall}, {"params", params}});
      emit_json(rows, m_out);
    }
  } catch (const CLI::Error& e) {
    std::cerr << "usage: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return e.kind() == ErrorKind::ParseError ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
  return 0;
}
