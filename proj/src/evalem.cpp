#include "adfa/evalem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "adfa/error.hpp"
#include "adfa/inference.hpp"
#include "adfa/loadings.hpp"
#include "adfa/parallel.hpp"
#include "adfa/sampling.hpp"

namespace adfa {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

bool consistent(std::size_t code, const PartialAssignment& evidence) {
  for (std::size_t i = 0; i < evidence.size(); ++i)
    if (evidence[i].has_value() && static_cast<bool>(code >> i & 1U) != *evidence[i]) return false;
  return true;
}

}  // namespace

// ------------------------------------------------------------- exact posterior

PosteriorEngine::PosteriorEngine(const AdfaModel& model) : m_(model.m_latent()), n_(model.n_observed()) {
  if (m_ > kMaxEnumeratedLatents) throw CapacityError("exact posterior supports at most 22 latents");
  const std::size_t states = std::size_t{1} << m_;
  if (states * n_ > (std::size_t{1} << 26)) throw CapacityError("posterior tables too large for exact enumeration");
  log_prior_.resize(states);
  log_neg_.resize(states * n_);
  log_pos_.resize(states * n_);
  for (std::size_t code = 0; code < states; ++code) {
    const Assignment y = decode_latents(code, m_);
    log_prior_[code] = safe_log(model.latent().prob(y));
    for (std::size_t j = 0; j < n_; ++j) {
      const double q = model.loadings().negative_prob(j, y);
      log_neg_[code * n_ + j] = safe_log(q);
      log_pos_[code * n_ + j] = safe_log(1.0 - q);
    }
  }
}

std::vector<double> PosteriorEngine::state_scores(std::span<const std::uint8_t> x, const PartialAssignment& evidence,
                                                  double& log_norm) const {
  if (x.size() != n_) throw InvalidArgument("observation row has the wrong length");
  if (!evidence.empty() && evidence.size() != m_) throw InvalidArgument("latent evidence has the wrong length");
  const std::size_t states = log_prior_.size();
  std::vector<double> s(states, kNegInf);
  double best = kNegInf;
  for (std::size_t code = 0; code < states; ++code) {
    if (!evidence.empty() && !consistent(code, evidence)) continue;
    double v = log_prior_[code];
    const double* neg = log_neg_.data() + code * n_;
    const double* pos = log_pos_.data() + code * n_;
    for (std::size_t j = 0; j < n_ && v != kNegInf; ++j) v += x[j] ? pos[j] : neg[j];
    s[code] = v;
    best = std::max(best, v);
  }
  if (best == kNegInf) {
    log_norm = kNegInf;
    return s;
  }
  double acc = 0.0;
  for (double v : s)
    if (v != kNegInf) acc += std::exp(v - best);
  log_norm = best + std::log(acc);
  return s;
}

std::vector<double> PosteriorEngine::posterior(std::span<const std::uint8_t> x, const PartialAssignment& evidence) const {
  double norm = 0.0;
  const std::vector<double> s = state_scores(x, evidence, norm);
  if (norm == kNegInf) throw ConditioningError("observation has probability zero under the model");
  std::vector<double> post(m_, 0.0);
  for (std::size_t code = 0; code < s.size(); ++code) {
    if (s[code] == kNegInf) continue;
    const double w = std::exp(s[code] - norm);
    for (std::size_t i = 0; i < m_; ++i)
      if (code >> i & 1U) post[i] += w;
  }
  return post;
}

double PosteriorEngine::log_evidence(std::span<const std::uint8_t> x, const PartialAssignment& evidence) const {
  double norm = 0.0;
  state_scores(x, evidence, norm);
  return norm;
}

std::vector<double> posterior_exact(const AdfaModel& model, std::span<const std::uint8_t> x) {
  return PosteriorEngine(model).posterior(x);
}

// ----------------------------------------------------------------------- Gibbs

namespace {

class GibbsChain {
 public:
  GibbsChain(const AdfaModel& model, std::span<const std::uint8_t> x, std::uint64_t seed)
      : model_(model), x_(x), rng_(seed), edges_(model.m_latent()) {
    if (x.size() != model.n_observed()) throw InvalidArgument("observation row has the wrong length");
    const auto& L = model.loadings();
    for (std::size_t i = 0; i < model.m_latent(); ++i)
      for (std::size_t j = 0; j < model.n_observed(); ++j)
        if (L.has_edge(i, j)) edges_[i].push_back(j);
    y_ = sample_latents(model.latent(), rng_);
  }

  void sweep() {
    const auto& L = model_.loadings();
    const auto& net = model_.latent();
    for (std::size_t i = 0; i < y_.size(); ++i) {
      double logp[2];
      for (std::uint8_t v = 0; v < 2; ++v) {
        y_[i] = v;
        double lp = safe_log(net.conditional(i, y_));
        for (std::size_t c : net.children(i)) lp += safe_log(net.conditional(c, y_));
        for (std::size_t j : edges_[i]) {
          const double q = L.negative_prob(j, y_);
          lp += safe_log(x_[j] ? 1.0 - q : q);
        }
        logp[v] = lp;
      }
      double p1;
      if (logp[0] == kNegInf && logp[1] == kNegInf) {
        p1 = 0.5;
      } else if (logp[1] == kNegInf) {
        p1 = 0.0;
      } else if (logp[0] == kNegInf) {
        p1 = 1.0;
      } else {
        p1 = 1.0 / (1.0 + std::exp(logp[0] - logp[1]));
      }
      y_[i] = uniform01(rng_) < p1 ? 1 : 0;
    }
  }

  const Assignment& state() const { return y_; }

 private:
  const AdfaModel& model_;
  std::span<const std::uint8_t> x_;
  Rng rng_;
  std::vector<std::vector<std::size_t>> edges_;
  Assignment y_;
};

}  // namespace

std::vector<double> gibbs_posterior(const AdfaModel& model, std::span<const std::uint8_t> x, std::size_t sweeps,
                                    std::size_t burn_in, std::uint64_t seed) {
  if (sweeps <= burn_in) throw InvalidArgument("Gibbs needs more sweeps than burn-in sweeps");
  GibbsChain chain(model, x, seed);
  std::vector<double> acc(model.m_latent(), 0.0);
  for (std::size_t s = 0; s < sweeps; ++s) {
    chain.sweep();
    if (s < burn_in) continue;
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += chain.state()[i];
  }
  for (double& a : acc) a /= static_cast<double>(sweeps - burn_in);
  return acc;
}

std::vector<Assignment> gibbs_samples(const AdfaModel& model, std::span<const std::uint8_t> x, std::size_t burn_in,
                                      std::size_t sweeps, std::size_t keep, std::uint64_t seed) {
  if (keep == 0 || keep > sweeps) throw InvalidArgument("retained samples must be between 1 and the sweep count");
  GibbsChain chain(model, x, seed);
  for (std::size_t s = 0; s < burn_in; ++s) chain.sweep();
  std::vector<Assignment> out;
  out.reserve(keep);
  std::size_t next = 0;
  for (std::size_t s = 1; s <= sweeps; ++s) {
    chain.sweep();
    if (next < keep && s == (next + 1) * sweeps / keep) {
      out.push_back(chain.state());
      ++next;
    }
  }
  return out;
}

// ------------------------------------------------------------------ evaluation

double heldout_latent_loglik(const LatentNetwork& latent, const BinaryDataset& labels) {
  if (!labels.has_latent() || labels.m_latent() != latent.size()) {
    throw InvalidArgument("held-out labels must have one column per latent");
  }
  if (labels.rows() == 0) throw InvalidArgument("held-out labels are empty");
  double total = 0.0;
  for (std::size_t r = 0; r < labels.rows(); ++r) total += latent.log_prob(labels.latent_assignment(r), kLogLikFloor);
  return total / static_cast<double>(labels.rows());
}

std::vector<std::size_t> last_tag_rank(const PosteriorEngine& engine, std::size_t m, std::span<const std::uint8_t> x,
                                       std::span<const std::size_t> revealed) {
  PartialAssignment evidence(m);
  for (std::size_t i : revealed) {
    if (i >= m) throw InvalidArgument("revealed tag out of range");
    evidence[i] = true;
  }
  const std::vector<double> post = engine.posterior(x, evidence);
  std::vector<std::size_t> cand;
  for (std::size_t i = 0; i < m; ++i)
    if (!evidence[i].has_value()) cand.push_back(i);
  std::stable_sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) { return post[a] > post[b]; });
  return cand;
}

LastTagReport last_tag_accuracy(const AdfaModel& model, const BinaryDataset& data, std::uint64_t seed,
                                std::size_t threads) {
  if (!data.has_latent() || data.m_latent() != model.m_latent()) {
    throw InvalidArgument("last-tag evaluation needs latent labels for every latent");
  }
  const PosteriorEngine engine(model);
  const std::size_t m = model.m_latent();
  std::vector<std::int8_t> outcome(data.rows(), -1);
  parallel_for(data.rows(), threads, [&](std::size_t r) {
    std::vector<std::size_t> positives;
    for (std::size_t i = 0; i < m; ++i)
      if (data.latent(r)[i] == 1) positives.push_back(i);
    if (positives.size() < 2) return;
    Rng rng(substream_seed(seed, "last-tag", r));
    const std::size_t pick = uniform_index(rng, positives.size());
    const std::size_t withheld = positives[pick];
    positives.erase(positives.begin() + static_cast<std::ptrdiff_t>(pick));
    const auto rank = last_tag_rank(engine, m, data.observed(r), positives);
    outcome[r] = !rank.empty() && rank.front() == withheld ? 1 : 0;
  });
  LastTagReport rep;
  for (std::int8_t o : outcome) {
    if (o < 0) continue;
    ++rep.evaluated;
    rep.correct += static_cast<std::size_t>(o);
  }
  return rep;
}

// -------------------------------------------------------------------------- EM

std::vector<double> aux_distribution(std::span<const double> failures, double leak, std::span<const std::uint8_t> y) {
  const std::size_t m = failures.size();
  if (y.size() != m) throw InvalidArgument("aux_distribution: assignment length mismatch");
  std::vector<double> p(m + 2, 0.0);
  double survive = 1.0;  // probability no earlier active slot fired
  for (std::size_t k = 0; k <= m; ++k) {
    const bool active = k == m || y[k];
    if (!active) continue;
    const double f = k == m ? 1.0 - leak : failures[k];
    p[k] = survive * (1.0 - f);
    survive *= f;
  }
  p[m + 1] = survive;
  return p;
}

AuxCounts::AuxCounts(std::size_t m_latent, std::size_t n_observed)
    : m(m_latent), n(n_observed), fired(n_observed * (m_latent + 2), 0.0), tried(n_observed * (m_latent + 1), 0.0) {}

AuxCounts accumulate_aux_counts(const NoisyOrLoadings& loadings, const BinaryDataset& data,
                                const std::vector<std::vector<Assignment>>& samples) {
  const std::size_t m = loadings.m_latent(), n = loadings.n_observed();
  if (samples.size() != data.rows()) throw InvalidArgument("one sample list per data row required");
  AuxCounts counts(m, n);
  std::vector<std::vector<double>> columns(n);
  for (std::size_t j = 0; j < n; ++j) columns[j] = loadings.failure_column(j);
  std::vector<double> suffix(m + 1);
  for (std::size_t r = 0; r < data.rows(); ++r) {
    const auto x = data.observed(r);
    for (const Assignment& y : samples[r]) {
      for (std::size_t j = 0; j < n; ++j) {
        const std::vector<double> p = aux_distribution(columns[j], loadings.leak(j), y);
        if (!x[j]) {
          counts.fired_at(j, m + 1) += 1.0;
          for (std::size_t k = 0; k <= m; ++k)
            if (k == m || y[k]) counts.tried_at(j, k) += 1.0;
          continue;
        }
        const double fire = 1.0 - p[m + 1];
        if (!(fire > 0.0)) continue;  // impossible under the current parameters
        double tail = 0.0;
        for (std::size_t k = m + 1; k-- > 0;) {
          tail += p[k] / fire;
          suffix[k] = tail;
        }
        for (std::size_t k = 0; k <= m; ++k) {
          if (!(k == m || y[k])) continue;
          counts.fired_at(j, k) += p[k] / fire;
          counts.tried_at(j, k) += suffix[k];
        }
      }
    }
  }
  return counts;
}

double failure_from_counts(double fired, double tried) {
  if (!(tried > 0.0)) throw InvalidArgument("failure_from_counts needs a positive trial count");
  return 1.0 - fired / tried;
}

NoisyOrLoadings apply_aux_counts(const NoisyOrLoadings& loadings, const AuxCounts& counts) {
  NoisyOrLoadings out = loadings;
  const std::size_t m = loadings.m_latent();
  for (std::size_t j = 0; j < loadings.n_observed(); ++j) {
    for (std::size_t k = 0; k < m; ++k) {
      if (!loadings.has_edge(k, j) || !(counts.tried_at(j, k) > 0.0)) continue;
      out.set_failure(k, j, std::clamp(failure_from_counts(counts.fired_at(j, k), counts.tried_at(j, k)), kMinFailure, 1.0));
    }
    if (counts.tried_at(j, m) > 0.0) {
      const double leak = 1.0 - failure_from_counts(counts.fired_at(j, m), counts.tried_at(j, m));
      out.set_leak(j, std::clamp(leak, 0.0, 1.0 - 1e-12));
    }
  }
  return out;
}

double complete_data_loglik(const NoisyOrLoadings& loadings, const BinaryDataset& data,
                            const std::vector<std::vector<Assignment>>& samples) {
  double total = 0.0;
  for (std::size_t r = 0; r < data.rows(); ++r) {
    const auto x = data.observed(r);
    for (const Assignment& y : samples[r])
      for (std::size_t j = 0; j < loadings.n_observed(); ++j) {
        const double q = loadings.negative_prob(j, y);
        total += std::log(std::max(x[j] ? 1.0 - q : q, 1e-300));
      }
  }
  return total;
}

EmResult em_refine(const AdfaModel& model, const BinaryDataset& data, const EmOptions& options,
                   const std::function<void(std::size_t, const AdfaModel&)>& on_step) {
  if (data.n_observed() != model.n_observed()) throw InvalidArgument("dataset does not match the model");
  if (data.rows() == 0) throw InvalidArgument("EM needs data");
  EmResult result{model, {}};
  for (std::size_t step = 0; step < options.outer_steps; ++step) {
    const AdfaModel& cur = result.model;
    std::vector<std::vector<Assignment>> samples(data.rows());
    const std::uint64_t step_seed = substream_seed(options.seed, "em-step", step);
    parallel_for(data.rows(), options.threads, [&](std::size_t r) {
      samples[r] = gibbs_samples(cur, data.observed(r), options.burn_in, options.sweeps, options.samples,
                                 substream_seed(step_seed, "row", r));
    });
    EmStep rec;
    rec.loglik_before = complete_data_loglik(cur.loadings(), data, samples);
    const AuxCounts counts = accumulate_aux_counts(cur.loadings(), data, samples);
    NoisyOrLoadings next = apply_aux_counts(cur.loadings(), counts);
    rec.loglik_after = complete_data_loglik(next, data, samples);
    if (rec.loglik_after < rec.loglik_before - 1e-9 * std::max(1.0, std::abs(rec.loglik_before))) {
      throw InternalError("EM inner step decreased the complete-data log-likelihood");
    }
    for (std::size_t k = 0; k < next.failures().size(); ++k)
      rec.max_change = std::max(rec.max_change, std::abs(next.failures()[k] - cur.loadings().failures()[k]));
    for (std::size_t j = 0; j < next.n_observed(); ++j)
      rec.max_change = std::max(rec.max_change, std::abs(next.leak(j) - cur.loadings().leak(j)));
    AnchorMap anchors = AnchorMap::from_loadings(next, cur.anchors().anchors());
    result.model = AdfaModel(cur.space(), cur.latent(), std::move(next), std::move(anchors));
    result.trace.push_back(rec);
    if (on_step) on_step(step, result.model);
  }
  return result;
}

}  // namespace adfa
