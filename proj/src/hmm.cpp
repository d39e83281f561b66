#include "lcpm/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lcpm/errors.hpp"
#include "lcpm/kmeans.hpp"

namespace lcpm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Result of one scaled forward-backward pass.
struct FbPass {
  Eigen::MatrixXd gamma;   // T x N, rows sum to 1
  Eigen::MatrixXd xi_sum;  // N x N, expected transition counts
  double log_likelihood = 0.0;
  bool ok = true;
  std::string failure;
};

// log_b is N x T. Emissions are rescaled per frame by their column max so
// the recursion never underflows; the removed mass is restored in the
// returned log-likelihood.
FbPass forward_backward(const Eigen::VectorXd& initial,
                        const Eigen::MatrixXd& transition,
                        const Eigen::MatrixXd& log_b) {
  const int n = static_cast<int>(log_b.rows());
  const int t_len = static_cast<int>(log_b.cols());
  FbPass out;

  Eigen::VectorXd col_max(t_len);
  Eigen::MatrixXd b_scaled(n, t_len);
  for (int t = 0; t < t_len; ++t) {
    double m = log_b.col(t).maxCoeff();
    if (!std::isfinite(m)) {
      out.ok = false;
      out.failure = "all state emissions vanished at frame " +
                    std::to_string(t) +
                    "; consider stronger covariance regularization";
      return out;
    }
    col_max(t) = m;
    for (int j = 0; j < n; ++j) {
      double v = log_b(j, t) - m;
      // Flush to a true zero below the double underflow threshold; the
      // vectorized exp would return a denormal instead.
      b_scaled(j, t) = v < -745.0 ? 0.0 : std::exp(v);
    }
  }

  Eigen::MatrixXd alpha(n, t_len);  // normalized forward variables
  Eigen::VectorXd scale(t_len);
  alpha.col(0) = initial.cwiseProduct(b_scaled.col(0));
  scale(0) = alpha.col(0).sum();
  if (!(scale(0) > 0.0)) {
    out.ok = false;
    out.failure =
        "forward recursion lost all probability mass at frame 0; consider "
        "stronger covariance regularization";
    return out;
  }
  alpha.col(0) /= scale(0);
  for (int t = 1; t < t_len; ++t) {
    alpha.col(t) =
        (transition.transpose() * alpha.col(t - 1)).cwiseProduct(b_scaled.col(t));
    scale(t) = alpha.col(t).sum();
    if (!(scale(t) > 0.0)) {
      out.ok = false;
      out.failure = "forward recursion lost all probability mass at frame " +
                    std::to_string(t) +
                    "; consider stronger covariance regularization";
      return out;
    }
    alpha.col(t) /= scale(t);
  }

  Eigen::MatrixXd beta(n, t_len);
  beta.col(t_len - 1).setOnes();
  for (int t = t_len - 2; t >= 0; --t) {
    beta.col(t) =
        transition * b_scaled.col(t + 1).cwiseProduct(beta.col(t + 1));
    beta.col(t) /= scale(t + 1);
  }

  out.gamma.resize(t_len, n);
  for (int t = 0; t < t_len; ++t) {
    Eigen::VectorXd g = alpha.col(t).cwiseProduct(beta.col(t));
    double total = g.sum();
    if (!(total > 0.0)) {
      out.ok = false;
      out.failure = "state posteriors vanished at frame " + std::to_string(t);
      return out;
    }
    out.gamma.row(t) = (g / total).transpose();
  }

  out.xi_sum = Eigen::MatrixXd::Zero(n, n);
  for (int t = 0; t + 1 < t_len; ++t) {
    Eigen::MatrixXd xi =
        (alpha.col(t) *
         b_scaled.col(t + 1).cwiseProduct(beta.col(t + 1)).transpose())
            .cwiseProduct(transition) /
        scale(t + 1);
    double total = xi.sum();
    if (total > 0.0) xi /= total;
    out.xi_sum += xi;
  }

  out.log_likelihood = scale.array().log().sum() + col_max.sum();
  return out;
}

// Per-component log densities for every frame: result[j](m, t).
std::vector<Eigen::MatrixXd> component_log_densities(
    const std::vector<StateEmission>& emissions,
    const Eigen::MatrixXd& obs) {
  const int t_len = static_cast<int>(obs.cols());
  std::vector<Eigen::MatrixXd> out(emissions.size());
  for (std::size_t j = 0; j < emissions.size(); ++j) {
    const auto& comps = emissions[j].components;
    out[j].resize(comps.size(), t_len);
    for (std::size_t m = 0; m < comps.size(); ++m) {
      for (int t = 0; t < t_len; ++t) {
        out[j](static_cast<int>(m), t) =
            gaussian_log_density(obs.col(t), comps[m]);
      }
    }
  }
  return out;
}

// log b_j(o_t) from per-component densities and mixture weights.
Eigen::MatrixXd state_log_densities(
    const std::vector<StateEmission>& emissions,
    const std::vector<Eigen::MatrixXd>& comp_log) {
  const int n = static_cast<int>(emissions.size());
  const int t_len = static_cast<int>(comp_log[0].cols());
  Eigen::MatrixXd log_b(n, t_len);
  for (int j = 0; j < n; ++j) {
    const auto& comps = emissions[j].components;
    if (comps.size() == 1) {
      log_b.row(j) = comp_log[j].row(0);
      continue;
    }
    for (int t = 0; t < t_len; ++t) {
      double m = kNegInf;
      for (std::size_t c = 0; c < comps.size(); ++c) {
        double v = std::log(comps[c].weight) + comp_log[j](static_cast<int>(c), t);
        m = std::max(m, v);
      }
      double sum = 0.0;
      for (std::size_t c = 0; c < comps.size(); ++c) {
        sum += std::exp(std::log(comps[c].weight) +
                        comp_log[j](static_cast<int>(c), t) - m);
      }
      log_b(j, t) = m + std::log(sum);
    }
  }
  return log_b;
}

Eigen::MatrixXd log_emission_matrix(const HmmModel& model,
                                    const Eigen::MatrixXd& obs) {
  auto comp_log = component_log_densities(model.emissions, obs);
  return state_log_densities(model.emissions, comp_log);
}

struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;  // per-dimension std, 1.0 where degenerate
  double log_scale_sum = 0.0;
};

Standardization standardize_stats(const Eigen::MatrixXd& obs) {
  Standardization s;
  const auto t_len = static_cast<double>(obs.cols());
  s.mean = obs.rowwise().mean();
  Eigen::MatrixXd centered = obs.colwise() - s.mean;
  s.scale = (centered.array().square().rowwise().sum() / t_len).sqrt();
  for (Eigen::Index d = 0; d < s.scale.size(); ++d) {
    if (!(s.scale(d) > 1e-12)) s.scale(d) = 1.0;
  }
  s.log_scale_sum = s.scale.array().log().sum();
  return s;
}

}  // namespace

double StateEmission::log_density(const Eigen::VectorXd& x) const {
  if (components.size() == 1) return gaussian_log_density(x, components[0]);
  double m = kNegInf;
  std::vector<double> vals(components.size());
  for (std::size_t c = 0; c < components.size(); ++c) {
    vals[c] = std::log(components[c].weight) +
              gaussian_log_density(x, components[c]);
    m = std::max(m, vals[c]);
  }
  if (!std::isfinite(m)) return kNegInf;
  double sum = 0.0;
  for (double v : vals) sum += std::exp(v - m);
  return m + std::log(sum);
}

FitResult fit_hmm(const Eigen::MatrixXd& observations, int n_states,
                  std::uint64_t seed, const FitOptions& options) {
  const int dim = static_cast<int>(observations.rows());
  const int t_len = static_cast<int>(observations.cols());
  const int n_mix = options.mixtures_per_state;
  if (n_states < 1) throw ValidationError("fit_hmm requires n_states >= 1");
  if (t_len < n_states) {
    throw ValidationError("fit_hmm requires at least n_states observations (T=" +
                          std::to_string(t_len) + ", N=" +
                          std::to_string(n_states) + ")");
  }
  if (n_mix < 1) throw ValidationError("mixtures_per_state must be >= 1");
  if (t_len < n_states * n_mix) {
    throw ValidationError("sequence too short for the requested mixture size");
  }
  if (!observations.allFinite()) {
    throw ValidationError("observations contain non-finite values");
  }

  Standardization st;
  Eigen::MatrixXd z;
  if (options.standardize) {
    st = standardize_stats(observations);
    z = (observations.colwise() - st.mean).array().colwise() / st.scale.array();
  } else {
    st.mean = Eigen::VectorXd::Zero(dim);
    st.scale = Eigen::VectorXd::Ones(dim);
    z = observations;
  }
  // Regularization equivalent to cov_regularization * I in observation
  // units, expressed in the standardized coordinates of the fit.
  Eigen::VectorXd reg = options.cov_regularization *
                        st.scale.array().square().inverse().matrix();

  Eigen::MatrixXd global_cov;
  {
    Eigen::MatrixXd centered = z.colwise() - z.rowwise().mean().eval();
    global_cov = centered * centered.transpose() / static_cast<double>(t_len);
    global_cov.diagonal() += reg;
  }

  // --- Initialization: k-means over the observation vectors. ---
  HmmModel model;
  model.n_states = n_states;
  model.initial = Eigen::VectorXd::Constant(n_states, 1.0 / n_states);
  model.transition = Eigen::MatrixXd::Constant(
      n_states, n_states,
      n_states > 1 ? (1.0 - options.sticky_init) / (n_states - 1) : 1.0);
  if (n_states > 1) {
    model.transition.diagonal().setConstant(options.sticky_init);
  }

  KmeansResult km = kmeans_euclid(z, n_states, seed);
  for (int restart = 1; restart < options.kmeans_restarts; ++restart) {
    KmeansResult other =
        kmeans_euclid(z, n_states, seed + 0x9e3779b97f4a7c15ULL * restart);
    if (other.objective_trace.back() < km.objective_trace.back()) {
      km = std::move(other);
    }
  }
  model.emissions.resize(n_states);
  for (int j = 0; j < n_states; ++j) {
    std::vector<int> members;
    for (int t = 0; t < t_len; ++t) {
      if (km.labels[t] == j) members.push_back(t);
    }
    auto init_component = [&](const std::vector<int>& idx) {
      GaussianComponent comp;
      comp.mean = Eigen::VectorXd::Zero(dim);
      for (int t : idx) comp.mean += z.col(t);
      if (!idx.empty()) comp.mean /= static_cast<double>(idx.size());
      if (idx.size() >= 2) {
        comp.covariance = Eigen::MatrixXd::Zero(dim, dim);
        for (int t : idx) {
          Eigen::VectorXd c = z.col(t) - comp.mean;
          comp.covariance += c * c.transpose();
        }
        comp.covariance /= static_cast<double>(idx.size());
        comp.covariance.diagonal() += reg;
      } else {
        comp.covariance = global_cov;
      }
      return comp;
    };
    if (n_mix == 1) {
      GaussianComponent comp = init_component(members);
      comp.weight = 1.0;
      model.emissions[j].components.push_back(std::move(comp));
    } else {
      // Sub-cluster the state's members to place the mixture components.
      Eigen::MatrixXd sub(dim, members.size());
      for (std::size_t i = 0; i < members.size(); ++i) {
        sub.col(static_cast<Eigen::Index>(i)) = z.col(members[i]);
      }
      int eff = std::min<int>(n_mix, static_cast<int>(members.size()));
      if (eff < 1) eff = 1;
      KmeansResult sub_km;
      if (static_cast<int>(members.size()) >= eff && !members.empty()) {
        sub_km = kmeans_euclid(sub, eff, seed + 17 * (j + 1));
      }
      for (int m = 0; m < n_mix; ++m) {
        std::vector<int> idx;
        if (m < eff) {
          for (std::size_t i = 0; i < members.size(); ++i) {
            if (sub_km.labels[i] == m) idx.push_back(members[i]);
          }
        }
        GaussianComponent comp = init_component(idx);
        if (idx.empty()) comp.covariance = global_cov;
        comp.weight = std::max(1.0, static_cast<double>(idx.size())) /
                      std::max(1.0, static_cast<double>(members.size()));
        model.emissions[j].components.push_back(std::move(comp));
      }
      // Renormalize the weights.
      double total = 0.0;
      for (auto& c : model.emissions[j].components) total += c.weight;
      for (auto& c : model.emissions[j].components) c.weight /= total;
    }
  }

  // --- EM ---
  FitResult result;
  double prev_ll = kNegInf;
  HmmModel previous = model;
  for (int iter = 0; iter < options.max_iters; ++iter) {
    auto comp_log = component_log_densities(model.emissions, z);
    Eigen::MatrixXd log_b = state_log_densities(model.emissions, comp_log);
    FbPass fb = forward_backward(model.initial, model.transition, log_b);
    if (!fb.ok) {
      result.degenerate = true;
      result.degenerate_reason = fb.failure;
      break;
    }

    double ll = fb.log_likelihood - static_cast<double>(t_len) * st.log_scale_sum;
    if (!std::isfinite(ll)) {
      result.degenerate = true;
      result.degenerate_reason = "non-finite log-likelihood";
      break;
    }
    if (iter > 0 && std::abs(ll - prev_ll) < options.tolerance) {
      result.log_likelihood_trace.push_back(ll);
      result.iterations = iter + 1;
      result.converged = true;
      break;
    }
    if (iter > 0 && ll < prev_ll) {
      // The per-step covariance regularization is not the exact maximizer
      // of any fixed objective; on rank-deficient (noise-free) inputs it
      // can dip the likelihood once EM has nothing left to gain. Roll
      // back and stop; a larger decrease is a fault.
      if (ll < prev_ll - 1e-6 * std::max(1.0, std::abs(prev_ll))) {
        throw NumericError(
            "EM log-likelihood decreased (" + std::to_string(prev_ll) +
            " -> " + std::to_string(ll) +
            "); this indicates an implementation fault");
      }
      model = previous;
      break;
    }
    result.log_likelihood_trace.push_back(ll);
    result.iterations = iter + 1;
    prev_ll = ll;
    if (iter + 1 == options.max_iters) break;

    // Degeneracy check: every state must keep some responsibility, both
    // overall and over the transition frames.
    Eigen::VectorXd occupancy = fb.gamma.colwise().sum();
    Eigen::VectorXd trans_occupancy =
        fb.gamma.topRows(t_len - 1).colwise().sum();
    bool starved = false;
    std::string starved_reason;
    for (int j = 0; j < n_states; ++j) {
      if (occupancy(j) < 1e-8 ||
          (t_len > 1 && trans_occupancy(j) < 1e-10)) {
        starved = true;
        starved_reason =
            "state " + std::to_string(j) + " is never visited";
        break;
      }
    }
    if (starved) {
      result.degenerate = true;
      result.degenerate_reason = starved_reason;
      break;
    }

    // --- M-step ---
    HmmModel next = model;
    next.initial = fb.gamma.row(0).transpose();
    next.initial /= next.initial.sum();
    if (t_len > 1) {
      for (int i = 0; i < n_states; ++i) {
        double row_sum = fb.xi_sum.row(i).sum();
        next.transition.row(i) = fb.xi_sum.row(i) / row_sum;
      }
    }

    bool component_starved = false;
    for (int j = 0; j < n_states && !component_starved; ++j) {
      auto& comps = next.emissions[j].components;
      const int n_comp = static_cast<int>(comps.size());
      // Responsibilities r(m, t) = gamma_t(j) * w_m N_m(z_t) / b_j(z_t).
      Eigen::MatrixXd resp(n_comp, t_len);
      if (n_comp == 1) {
        resp.row(0) = fb.gamma.col(j).transpose();
      } else {
        for (int t = 0; t < t_len; ++t) {
          for (int m = 0; m < n_comp; ++m) {
            resp(m, t) = fb.gamma(t, j) *
                         std::exp(std::log(model.emissions[j].components[m].weight) +
                                  comp_log[j](m, t) - log_b(j, t));
          }
        }
      }
      double state_total = resp.sum();
      for (int m = 0; m < n_comp; ++m) {
        double w_total = resp.row(m).sum();
        if (w_total < 1e-10) {
          component_starved = true;
          result.degenerate_reason = "mixture component " + std::to_string(m) +
                                     " of state " + std::to_string(j) +
                                     " lost all responsibility";
          break;
        }
        Eigen::VectorXd mu = Eigen::VectorXd::Zero(dim);
        for (int t = 0; t < t_len; ++t) mu += resp(m, t) * z.col(t);
        mu /= w_total;
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
        for (int t = 0; t < t_len; ++t) {
          Eigen::VectorXd c = z.col(t) - mu;
          cov += resp(m, t) * (c * c.transpose());
        }
        cov /= w_total;
        cov.diagonal() += reg;
        comps[m].mean = std::move(mu);
        comps[m].covariance = std::move(cov);
        comps[m].weight = n_comp == 1 ? 1.0 : w_total / state_total;
      }
    }
    if (component_starved) {
      result.degenerate = true;
      break;
    }
    previous = model;
    model = std::move(next);
  }

  // Map parameters back to observation units.
  if (options.standardize) {
    Eigen::MatrixXd d_scale = st.scale.asDiagonal();
    for (auto& emission : model.emissions) {
      for (auto& comp : emission.components) {
        comp.mean = st.scale.cwiseProduct(comp.mean) + st.mean;
        comp.covariance = d_scale * comp.covariance * d_scale;
      }
    }
  }
  result.model = std::move(model);
  return result;
}

Eigen::MatrixXd posterior(const HmmModel& model,
                          const Eigen::MatrixXd& observations) {
  Eigen::MatrixXd log_b = log_emission_matrix(model, observations);
  FbPass fb = forward_backward(model.initial, model.transition, log_b);
  if (!fb.ok) throw NumericError(fb.failure);
  return fb.gamma;
}

double log_likelihood(const HmmModel& model,
                      const Eigen::MatrixXd& observations) {
  Eigen::MatrixXd log_b = log_emission_matrix(model, observations);
  FbPass fb = forward_backward(model.initial, model.transition, log_b);
  if (!fb.ok) throw NumericError(fb.failure);
  return fb.log_likelihood;
}

std::vector<int> decode(const HmmModel& model,
                        const Eigen::MatrixXd& observations, DecodeMode mode) {
  const int n = model.n_states;
  const int t_len = static_cast<int>(observations.cols());
  if (mode == DecodeMode::kPosteriorArgmax) {
    Eigen::MatrixXd gamma = posterior(model, observations);
    std::vector<int> states(t_len);
    for (int t = 0; t < t_len; ++t) {
      int best = 0;
      for (int j = 1; j < n; ++j) {
        if (gamma(t, j) > gamma(t, best)) best = j;
      }
      states[t] = best;
    }
    return states;
  }

  Eigen::MatrixXd log_b = log_emission_matrix(model, observations);
  Eigen::MatrixXd log_a = model.transition.array().log();
  Eigen::VectorXd delta = model.initial.array().log().matrix() + log_b.col(0);
  Eigen::MatrixXi backpointer(n, t_len);
  for (int t = 1; t < t_len; ++t) {
    Eigen::VectorXd next(n);
    for (int j = 0; j < n; ++j) {
      int best_i = 0;
      double best = kNegInf;
      for (int i = 0; i < n; ++i) {
        double v = delta(i) + log_a(i, j);
        if (v > best) {  // strict: ties keep the lower index
          best = v;
          best_i = i;
        }
      }
      next(j) = best + log_b(j, t);
      backpointer(j, t) = best_i;
    }
    delta = next;
  }
  int last = 0;
  for (int j = 1; j < n; ++j) {
    if (delta(j) > delta(last)) last = j;
  }
  std::vector<int> states(t_len);
  states[t_len - 1] = last;
  for (int t = t_len - 1; t > 0; --t) {
    states[t - 1] = backpointer(states[t], t);
  }
  return states;
}

double path_log_probability(const HmmModel& model,
                            const Eigen::MatrixXd& observations,
                            const std::vector<int>& states) {
  const int t_len = static_cast<int>(observations.cols());
  double lp = std::log(model.initial(states[0])) +
              model.emissions[states[0]].log_density(observations.col(0));
  for (int t = 1; t < t_len; ++t) {
    lp += std::log(model.transition(states[t - 1], states[t])) +
          model.emissions[states[t]].log_density(observations.col(t));
  }
  return lp;
}

SelectResult select_model(const Eigen::MatrixXd& observations, int n_max,
                          std::uint64_t seed, SelectionCriterion criterion,
                          const FitOptions& options) {
  if (n_max < 1) throw ValidationError("select_model requires n_max >= 1");
  SelectResult result;
  std::vector<FitResult> fits;
  for (int n = 1; n <= n_max; ++n) {
    SweepEntry entry;
    entry.n_states = n;
    FitResult fr;
    try {
      fr = fit_hmm(observations, n, seed, options);
    } catch (const ValidationError& e) {
      entry.status = e.what();
      result.sweep.push_back(entry);
      break;
    }
    double ll = fr.log_likelihood_trace.empty()
                    ? kNegInf
                    : fr.log_likelihood_trace.back();
    entry.log_likelihood = ll;
    if (fr.degenerate || !std::isfinite(ll)) {
      entry.status = fr.degenerate_reason.empty() ? "non-finite likelihood"
                                                  : fr.degenerate_reason;
      result.sweep.push_back(entry);
      break;
    }
    entry.completed = true;
    entry.status = "ok";
    result.sweep.push_back(entry);
    fits.push_back(std::move(fr));
  }
  if (fits.empty()) {
    throw NumericError("model selection failed: no state count completed");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < fits.size(); ++i) {
    double cur = fits[i].log_likelihood_trace.back();
    double ref = fits[best].log_likelihood_trace.back();
    bool better = criterion == SelectionCriterion::kMaxLl ? cur > ref : cur < ref;
    if (better) best = i;
  }
  result.n_selected = fits[best].model.n_states;
  result.fit = std::move(fits[best]);
  return result;
}

std::vector<StateRun> state_runs(const std::vector<int>& states,
                                 int min_frames) {
  std::vector<StateRun> runs;
  if (states.empty()) return runs;
  int start = 0;
  for (std::size_t t = 1; t <= states.size(); ++t) {
    if (t == states.size() || states[t] != states[start]) {
      StateRun run;
      run.state = states[start];
      run.first_frame = start;
      run.last_frame = static_cast<int>(t) - 1;
      run.kept = run.length() >= min_frames;
      runs.push_back(run);
      start = static_cast<int>(t);
    }
  }
  return runs;
}

std::vector<Primitive> segment(const Scenario& scenario,
                               const std::vector<int>& states, int min_frames,
                               int scenario_index) {
  if (static_cast<int>(states.size()) != scenario.length()) {
    throw ValidationError("state sequence length does not match the scenario");
  }
  std::vector<Primitive> primitives;
  for (const StateRun& run : state_runs(states, min_frames)) {
    if (!run.kept) continue;
    Primitive p;
    p.scenario_index = scenario_index;
    p.state = run.state;
    p.first_frame = run.first_frame;
    p.last_frame = run.last_frame;
    p.points = scenario.points.middleCols(run.first_frame, run.length());
    p.frame_rate = scenario.frame_rate;
    primitives.push_back(std::move(p));
  }
  return primitives;
}

}  // namespace lcpm
