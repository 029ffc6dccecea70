#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "latentlin/bayesnet.hpp"
#include "latentlin/hier.hpp"
#include "latentlin/io.hpp"
#include "latentlin/metrics.hpp"
#include "latentlin/moments.hpp"
#include "latentlin/synth.hpp"

namespace latentlin {

/// Settings shared by both synthetic experiments. `levels` drives the
/// hierarchical one, (n, k) the Bayesian-network one.
struct ExperimentConfig {
  std::vector<Index> levels{3, 12, 40};
  Index n = 30;
  Index k = 5;
  double p = 0.3;
  std::vector<double> gammas{0.5};
  std::vector<Index> sample_sizes{50000};
  Index seeds = 5;
  std::uint64_t base_seed = 0;
  std::vector<NoiseFamily> noise_families{NoiseFamily::Exponential, NoiseFamily::Poisson, NoiseFamily::ChiSquared,
                                          NoiseFamily::Gaussian};
  std::optional<RecoveryVariant> variant;  // default: alg1 for exact moments, alg1_proj otherwise
  Index trials = 100;
  double eps_zero = 1e-6;
  bool exact_moments = false;
  bool scatter = true;

  RecoveryVariant resolved_variant() const {
    return variant.value_or(exact_moments ? RecoveryVariant::Alg1 : RecoveryVariant::Alg1Proj);
  }
};

inline std::vector<NoiseFamily> skewed_families() {
  return {NoiseFamily::Exponential, NoiseFamily::Poisson, NoiseFamily::ChiSquared};
}

inline ExperimentConfig example1_reduced() { return {}; }

inline ExperimentConfig example1_paper() {
  ExperimentConfig c;
  c.levels = {5, 30, 180};
  c.gammas = {0.3, 0.5};
  c.sample_sizes = {25000, 50000, 100000, 200000, 400000};
  return c;
}

inline ExperimentConfig example2_reduced() {
  ExperimentConfig c;
  c.n = 30;
  c.k = 5;
  c.sample_sizes = {200000};
  c.noise_families = skewed_families();
  return c;
}

inline ExperimentConfig example2_paper() {
  ExperimentConfig c = example2_reduced();
  c.n = 150;
  c.k = 25;
  c.gammas = {0.3, 0.5};
  c.sample_sizes = {200000, 300000, 400000, 500000};
  return c;
}

inline std::string variant_name(RecoveryVariant v) { return v == RecoveryVariant::Alg1 ? "alg1" : "alg1_proj"; }

inline RecoveryVariant variant_from_string(const std::string& s) {
  if (s == "alg1") return RecoveryVariant::Alg1;
  if (s == "alg1_proj") return RecoveryVariant::Alg1Proj;
  fail(ErrorKind::ParseError, "unknown recovery variant: " + s);
}

inline Json config_to_json(const ExperimentConfig& c) {
  Json j;
  j["levels"] = c.levels;
  j["n"] = c.n;
  j["k"] = c.k;
  j["p"] = c.p;
  j["gamma"] = c.gammas;
  j["N"] = c.sample_sizes;
  j["seeds"] = c.seeds;
  j["base_seed"] = c.base_seed;
  j["noise_families"] = Json::array();
  for (auto f : c.noise_families) j["noise_families"].push_back(std::string(to_string(f)));
  j["variant"] = variant_name(c.resolved_variant());
  j["trials"] = c.trials;
  j["eps_zero"] = c.eps_zero;
  j["exact_moments"] = c.exact_moments;
  j["scatter"] = c.scatter;
  return j;
}

/// Overlays the keys present in `j` onto `base`.
inline ExperimentConfig config_from_json(const Json& j, ExperimentConfig base = {}) {
  try {
    if (j.contains("levels")) base.levels = j.at("levels").get<std::vector<Index>>();
    if (j.contains("n")) base.n = j.at("n").get<Index>();
    if (j.contains("k")) base.k = j.at("k").get<Index>();
    if (j.contains("p")) base.p = j.at("p").get<double>();
    if (j.contains("gamma")) base.gammas = j.at("gamma").get<std::vector<double>>();
    if (j.contains("N")) base.sample_sizes = j.at("N").get<std::vector<Index>>();
    if (j.contains("seeds")) base.seeds = j.at("seeds").get<Index>();
    if (j.contains("base_seed")) base.base_seed = j.at("base_seed").get<std::uint64_t>();
    if (j.contains("noise_families")) {
      base.noise_families.clear();
      for (const auto& f : j.at("noise_families")) base.noise_families.push_back(noise_family_from_string(f.get<std::string>()));
    }
    if (j.contains("variant")) base.variant = variant_from_string(j.at("variant").get<std::string>());
    if (j.contains("trials")) base.trials = j.at("trials").get<Index>();
    if (j.contains("eps_zero")) base.eps_zero = j.at("eps_zero").get<double>();
    if (j.contains("exact_moments")) base.exact_moments = j.at("exact_moments").get<bool>();
    if (j.contains("scatter")) base.scatter = j.at("scatter").get<bool>();
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
  if (base.seeds < 1 || base.gammas.empty() || (!base.exact_moments && base.sample_sizes.empty()))
    fail(ErrorKind::ParseError, "config needs seeds >= 1, a gamma and a sample size");
  if (base.noise_families.empty()) fail(ErrorKind::ParseError, "config needs at least one noise family");
  return base;
}

struct ReportRow {
  std::string metric;
  std::optional<double> value;
  Json params;
};

struct ScatterPoint {
  std::string matrix;
  double gamma = 0.0;
  Index samples = 0;  // 0 for exact moments
  std::uint64_t seed = 0;
  Index i = 0, j = 0;
  double truth = 0.0, estimate = 0.0;
};

struct Report {
  std::vector<ReportRow> rows;
  std::vector<ScatterPoint> scatter;
};

/// (true, estimated) pairs for every entry after column alignment, row-major.
inline Matrix emit_scatter(const Matrix& a, const Matrix& a_hat) {
  const Matrix aligned = aligned_estimate(a_hat, align_columns(a, a_hat));
  Matrix out(a.rows() * a.cols(), 2);
  Index r = 0;
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j, ++r) {
      out(r, 0) = a(i, j);
      out(r, 1) = aligned(i, j);
    }
  return out;
}

inline Json report_to_json(const Report& rep) {
  Json arr = Json::array();
  for (const auto& r : rep.rows) {
    Json row;
    row["metric"] = r.metric;
    row["value"] = r.value ? Json(*r.value) : Json(nullptr);
    row["params"] = r.params;
    arr.push_back(std::move(row));
  }
  return arr;
}

inline void write_scatter_csv(std::ostream& out, const std::vector<ScatterPoint>& pts) {
  out << "matrix,gamma,N,seed,i,j,true,estimated\n" << std::setprecision(17);
  for (const auto& p : pts)
    out << p.matrix << ',' << p.gamma << ',' << p.samples << ',' << p.seed << ',' << p.i << ',' << p.j << ',' << p.truth
        << ',' << p.estimate << '\n';
}

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

struct Cell {
  double gamma;
  Index samples;
};

inline std::vector<Cell> cells(const ExperimentConfig& cfg) {
  std::vector<Cell> out;
  for (double g : cfg.gammas) {
    if (cfg.exact_moments) {
      out.push_back({g, 0});
      continue;
    }
    for (Index s : cfg.sample_sizes) out.push_back({g, s});
  }
  return out;
}

inline Json cell_params(const ExperimentConfig& cfg, const std::string& example, const Cell& c) {
  Json p;
  p["example"] = example;
  p["gamma"] = c.gamma;
  p["N"] = c.samples ? Json(c.samples) : Json("exact");
  p["p"] = cfg.p;
  p["variant"] = variant_name(cfg.resolved_variant());
  p["eps_zero"] = cfg.eps_zero;
  if (example == "example1")
    p["levels"] = cfg.levels;
  else {
    p["n"] = cfg.n;
    p["k"] = cfg.k;
  }
  return p;
}

/// Metric values of one seed in table order, or the error that stopped it.
struct SeedOutcome {
  std::vector<std::pair<std::string, std::optional<double>>> metrics;
  std::vector<ScatterPoint> scatter;
  std::optional<Error> error;
};

inline void add_scores(SeedOutcome& out, const std::string& name, const Matrix& truth, const Matrix& est_aligned,
                       double eps_zero) {
  const SupportScores s = support_scores(truth, est_aligned, eps_zero);
  out.metrics.push_back({"precision(" + name + ")", s.precision});
  out.metrics.push_back({"recall(" + name + ")", s.recall});
}

inline void add_scatter(SeedOutcome& out, const std::string& name, const Matrix& truth, const Matrix& aligned,
                        const Cell& c, std::uint64_t seed) {
  for (Index i = 0; i < truth.rows(); ++i)
    for (Index j = 0; j < truth.cols(); ++j)
      out.scatter.push_back({name, c.gamma, c.samples, seed, i, j, truth(i, j), aligned(i, j)});
}

/// Seeds run concurrently; rows are assembled in (cell, seed) order so the
/// report does not depend on scheduling.
template <typename RunSeed>
Report run_grid(const ExperimentConfig& cfg, const std::string& example, RunSeed run_seed) {
  Report rep;
  for (const Cell& c : cells(cfg)) {
    std::vector<SeedOutcome> outcomes(static_cast<std::size_t>(cfg.seeds));
    parallel_for(outcomes.size(), [&](std::size_t s) {
      const std::uint64_t seed = cfg.base_seed + s;
      try {
        outcomes[s] = run_seed(c, seed);
      } catch (const Error& e) {
        outcomes[s].error = e;
      }
    });
    const Json base = cell_params(cfg, example, c);
    std::vector<std::string> names;
    std::vector<std::vector<double>> values;
    Index ok = 0;
    for (std::size_t s = 0; s < outcomes.size(); ++s) {
      Json params = base;
      params["seed"] = cfg.base_seed + s;
      const SeedOutcome& o = outcomes[s];
      if (o.error) {
        params["error_kind"] = std::string(to_string(o.error->kind()));
        params["stage"] = o.error->stage();
        params["message"] = o.error->detail();
        rep.rows.push_back({"error", std::nullopt, params});
        continue;
      }
      ++ok;
      if (names.empty())
        for (const auto& m : o.metrics) {
          names.push_back(m.first);
          values.emplace_back();
        }
      for (std::size_t m = 0; m < o.metrics.size(); ++m) {
        rep.rows.push_back({o.metrics[m].first, o.metrics[m].second, params});
        if (o.metrics[m].second) values[m].push_back(*o.metrics[m].second);
      }
      if (cfg.scatter) rep.scatter.insert(rep.scatter.end(), o.scatter.begin(), o.scatter.end());
    }
    Json summary = base;
    summary["seed"] = "median";
    summary["seeds_ok"] = ok;
    summary["seeds"] = cfg.seeds;
    for (std::size_t m = 0; m < names.size(); ++m)
      rep.rows.push_back({names[m], values[m].empty() ? std::nullopt : std::optional<double>(median(values[m])), summary});
  }
  return rep;
}

}  // namespace detail

/// Planted three-or-more-level hierarchy with Bernoulli-Gaussian matrices,
/// each given the row gap gamma.
inline HierarchicalModel gen_hierarchy(const std::vector<Index>& levels, double p, double gamma,
                                       const std::vector<NoiseFamily>& families, std::uint64_t seed) {
  HierarchicalModel hm;
  hm.level_sizes = levels;
  for (std::size_t i = 0; i + 1 < levels.size(); ++i)
    hm.matrices.push_back(gen_planted_coefficients(levels[i + 1], levels[i], p, gamma, mix_seed(seed, 1 + i)));
  for (std::size_t i = 0; i < levels.size(); ++i)
    hm.noise.push_back(gen_noise(levels[i], families, mix_seed(seed, 100 + i)));
  hm.validate();
  return hm;
}

/// Single-view Bayesian network: Bernoulli-Gaussian A with row gap, random
/// lower-triangular Lambda, skewed noise everywhere.
inline LatentLinearModel gen_bn_model(Index n, Index k, double p, double gamma, const std::vector<NoiseFamily>& families,
                                      std::uint64_t seed) {
  const Matrix a = gen_planted_coefficients(n, k, p, gamma, mix_seed(seed, 1));
  const Matrix lam = gen_lower_triangular_dag(k, p, mix_seed(seed, 2));
  return LatentLinearModel(CoefficientMatrix(a), DagMatrix(lam), gen_noise(k, families, mix_seed(seed, 3)),
                           gen_noise(n, families, mix_seed(seed, 4)));
}

/// True coefficient matrices written in the estimated labeling of every
/// hidden level, deepest first, so each can be compared with its estimate.
inline std::vector<Matrix> truths_in_estimated_rows(const std::vector<Matrix>& truth, const std::vector<Matrix>& a_hats) {
  std::vector<Matrix> out(truth.size());
  out.back() = truth.back();
  for (std::size_t i = truth.size() - 1; i-- > 0;)
    out[i] = express_in_estimated_rows(truth[i], out[i + 1], a_hats[i + 1]);
  return out;
}

/// Hierarchical experiment: dist, precision and recall for each A_i.
inline Report run_example1(const ExperimentConfig& cfg) {
  if (cfg.levels.size() < 2) fail(ErrorKind::ParseError, "example1 needs at least two levels");
  return detail::run_grid(cfg, "example1", [&](const detail::Cell& c, std::uint64_t seed) {
    const HierarchicalModel hm = gen_hierarchy(cfg.levels, cfg.p, c.gamma, cfg.noise_families, seed);
    const Matrix pairs = c.samples ? empirical_pairs(sample_hierarchical(hm, c.samples, mix_seed(seed, 200)))
                                   : hm.observed_covariance();
    HierOptions ho;
    ho.partition_trials = cfg.trials;
    ho.variant = cfg.resolved_variant();
    ho.recovery_opts.eps_zero = cfg.eps_zero;
    const HierResult hr = learn_hierarchy(pairs, cfg.levels, seed, ho);
    const std::vector<Matrix> truths = truths_in_estimated_rows(hm.matrices, hr.a_hats);
    detail::SeedOutcome out;
    for (std::size_t i = 0; i < truths.size(); ++i) {
      const std::string name = "A" + std::to_string(i + 1) + ",A" + std::to_string(i + 1) + "_hat";
      const Matrix truth = canonicalize(truths[i]);
      const Matrix aligned = aligned_estimate(hr.a_hats[i], align_columns(truth, hr.a_hats[i]));
      out.metrics.push_back({"dist(" + name + ")", dist(truth, hr.a_hats[i])});
      detail::add_scores(out, name, truth, aligned, cfg.eps_zero);
      detail::add_scatter(out, "A" + std::to_string(i + 1), truth, aligned, c, seed);
    }
    return out;
  });
}

/// Bayesian-network experiment: dist, precision and recall for Lambda and A.
inline Report run_example2(const ExperimentConfig& cfg) {
  return detail::run_grid(cfg, "example2", [&](const detail::Cell& c, std::uint64_t seed) {
    const LatentLinearModel model = gen_bn_model(cfg.n, cfg.k, cfg.p, c.gamma, cfg.noise_families, seed);
    const MomentSet ms = c.samples ? empirical_moments(sample_single_view(model, c.samples, mix_seed(seed, 200)))
                                   : population_moments(model);
    PipelineOptions po;
    po.eca = EcaMethod::Power;
    po.recovery = cfg.resolved_variant();
    po.partition_trials = cfg.trials;
    po.recovery_opts.eps_zero = cfg.eps_zero;
    const BnResult bn = learn_bn_pipeline(ms, cfg.k, seed, po);

    const Matrix a_true = canonicalize(model.a.matrix());
    const ColumnAlignment al = align_columns(a_true, bn.a_hat);
    const Matrix a_aligned = aligned_estimate(bn.a_hat, al);
    const Matrix lam_true = canonical_lambda(model);
    const Matrix lam_hat = relabel_lambda(bn.lambda.matrix(), al);

    detail::SeedOutcome out;
    out.metrics.push_back({"dist(Lambda,Lambda_hat)", dist(lam_true, lam_hat)});
    detail::add_scores(out, "Lambda,Lambda_hat", lam_true, lam_hat, cfg.eps_zero);
    out.metrics.push_back({"dist(A,A_hat)", dist(a_true, bn.a_hat)});
    detail::add_scores(out, "A,A_hat", a_true, a_aligned, cfg.eps_zero);
    detail::add_scatter(out, "Lambda", lam_true, lam_hat, c, seed);
    detail::add_scatter(out, "A", a_true, a_aligned, c, seed);
    return out;
  });
}

}  // namespace latentlin
