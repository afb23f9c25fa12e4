#include "cep/baselines.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace cep {

namespace {

Mat expand_weight(const Mat &weight, Eigen::Index dim) {
  if (weight.rows() == 1 && weight.cols() == 1) return weight(0, 0) * Mat::Identity(dim, dim);
  if (weight.rows() != dim || weight.cols() != dim) {
    throw std::invalid_argument("APF weight dimension does not match its task space");
  }
  return weight;
}

double scale_of(const Mat &m) { return std::max(1.0, m.cwiseAbs().maxCoeff()); }

bool is_symmetric(const Mat &m, double tol) {
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale_of(m);
}

// Vectorised symmetric matrix <-> upper-triangle parameters.
Mat sym_from_params(const Vec &p, Eigen::Index d) {
  Mat s(d, d);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i; j < d; ++j) {
      s(i, j) = p(k);
      s(j, i) = p(k);
      ++k;
    }
  }
  return s;
}

bool is_positive_definite(const Mat &m) {
  Eigen::LLT<Mat> llt(0.5 * (m + m.transpose()));
  return llt.info() == Eigen::Success;
}

} // namespace

Mat damped_pseudoinverse(const Mat &J, double damping) {
  if (J.size() == 0) return Mat::Zero(J.cols(), J.rows());
  Eigen::JacobiSVD<Mat> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec &sigma = svd.singularValues();
  const double threshold = std::sqrt(damping);
  const double sigma_min = sigma(sigma.size() - 1);
  double lambda = 0.0;
  if (sigma_min < threshold) {
    const double ratio = sigma_min / threshold;
    lambda = damping * (1.0 - ratio * ratio);
  }
  Vec inv(sigma.size());
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    const double denom = sigma(i) * sigma(i) + lambda;
    inv(i) = denom > 0.0 ? sigma(i) / denom : 0.0;
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Vec apf_action(const std::vector<APFComponent> &components, const JointState &state) {
  if (components.empty()) throw std::invalid_argument("APF needs at least one component");
  const LatentState source = to_latent(state);
  const Eigen::Index n = state.q.size();
  const Mat no_action = Mat::Zero(n, 1);
  Vec qdd = Vec::Zero(n);
  for (const auto &c : components) {
    const LatentBatch latent = c.map->apply(source, no_action);
    const Vec g = c.dynamics(latent.state);
    const Mat J = c.map->action_jacobian(source, no_action.col(0));
    qdd += damped_pseudoinverse(J) * (expand_weight(c.weight, g.size()) * g);
  }
  return qdd;
}

GaussianProduct gaussian_product(const std::vector<Vec> &means,
                                 const std::vector<Mat> &covariances) {
  if (means.empty()) throw std::invalid_argument("gaussian product needs at least one factor");
  if (means.size() != covariances.size()) {
    throw std::invalid_argument("gaussian product needs one covariance per mean");
  }
  const Eigen::Index d = means.front().size();
  Mat precision = Mat::Zero(d, d);
  Vec information = Vec::Zero(d);
  for (std::size_t k = 0; k < means.size(); ++k) {
    if (means[k].size() != d || covariances[k].rows() != d || covariances[k].cols() != d) {
      throw std::invalid_argument("gaussian product factor " + std::to_string(k) +
                                  " has mismatched dimension");
    }
    Eigen::LLT<Mat> llt(covariances[k]);
    if (llt.info() != Eigen::Success) {
      throw std::invalid_argument("gaussian product factor " + std::to_string(k) +
                                  " covariance is not positive definite");
    }
    const Mat p = llt.solve(Mat::Identity(d, d));
    precision += p;
    information += p * means[k];
  }
  Eigen::LLT<Mat> total(precision);
  GaussianProduct out;
  out.covariance = total.solve(Mat::Identity(d, d));
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  out.mean = total.solve(information);
  return out;
}

std::vector<Mat> weights_from_covariances(const std::vector<Mat> &covariances) {
  if (covariances.empty()) throw std::invalid_argument("need at least one covariance");
  const Eigen::Index d = covariances.front().rows();
  std::vector<Mat> precisions;
  Mat total = Mat::Zero(d, d);
  for (const auto &c : covariances) {
    if (c.rows() != d || c.cols() != d) throw std::invalid_argument("covariance dimension mismatch");
    Eigen::LLT<Mat> llt(c);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("covariance is not positive definite");
    precisions.push_back(llt.solve(Mat::Identity(d, d)));
    total += precisions.back();
  }
  Eigen::LLT<Mat> total_llt(total);
  std::vector<Mat> weights;
  for (const auto &p : precisions) weights.push_back(total_llt.solve(p));
  return weights;
}

std::vector<Mat> covariances_from_weights(const std::vector<Mat> &weights) {
  if (weights.empty()) throw std::invalid_argument("need at least one weight");
  const Eigen::Index d = weights.front().rows();
  Mat sum = Mat::Zero(d, d);
  for (const auto &w : weights) {
    if (w.rows() != d || w.cols() != d) throw std::invalid_argument("weight dimension mismatch");
    sum += w;
  }
  const double tol = 1e-9;
  if ((sum - Mat::Identity(d, d)).cwiseAbs().maxCoeff() > tol * scale_of(sum)) {
    throw std::invalid_argument(
        "weights do not sum to the identity, so they are not normalized expert precisions");
  }

  // Find SPD S = (Σ_j P_j)⁻¹ with Λ_k S symmetric for every k; then P_k = S⁻¹ Λ_k.
  Mat S = Mat::Identity(d, d);
  bool found = true;
  for (const auto &w : weights) found = found && is_symmetric(w, tol);
  if (!found) {
    const Eigen::Index m = d * (d + 1) / 2;
    const auto K = static_cast<Eigen::Index>(weights.size());
    Mat system(K * d * d, m);
    for (Eigen::Index p = 0; p < m; ++p) {
      Vec unit = Vec::Zero(m);
      unit(p) = 1.0;
      const Mat E = sym_from_params(unit, d);
      for (Eigen::Index k = 0; k < K; ++k) {
        const Mat &w = weights[static_cast<std::size_t>(k)];
        const Mat residual = w * E - E * w.transpose();
        system.block(k * d * d, p, d * d, 1) = residual.reshaped();
      }
    }
    Eigen::JacobiSVD<Mat> svd(system, Eigen::ComputeFullV);
    const Vec &sv = svd.singularValues();
    const double cutoff = 1e-9 * std::max(1.0, sv.size() ? sv(0) : 1.0);
    std::vector<Eigen::Index> null_cols;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double s = i < sv.size() ? sv(i) : 0.0;
      if (s <= cutoff) null_cols.push_back(i);
    }
    if (null_cols.empty()) {
      throw std::invalid_argument(
          "weights admit no common normalizer: no product of Gaussians reproduces them");
    }
    Mat basis(m, static_cast<Eigen::Index>(null_cols.size()));
    for (std::size_t i = 0; i < null_cols.size(); ++i) {
      basis.col(static_cast<Eigen::Index>(i)) = svd.matrixV().col(null_cols[i]);
    }
    // Candidates: projection of the identity, then each basis direction and its negation.
    std::vector<Vec> candidates;
    Vec eye_params(m);
    {
      Eigen::Index k = 0;
      for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = i; j < d; ++j) eye_params(k++) = (i == j) ? 1.0 : 0.0;
    }
    candidates.push_back(basis * (basis.transpose() * eye_params));
    for (Eigen::Index i = 0; i < basis.cols(); ++i) {
      candidates.push_back(basis.col(i));
      candidates.push_back(-basis.col(i));
    }
    found = false;
    for (const auto &c : candidates) {
      const Mat cand = sym_from_params(c, d);
      if (is_positive_definite(cand)) {
        S = cand;
        found = true;
        break;
      }
    }
    if (!found) {
      throw std::invalid_argument(
          "weights admit no positive-definite normalizer: no product of Gaussians reproduces them");
    }
  }

  const Mat S_inv = S.inverse();
  std::vector<Mat> covariances;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    Mat precision = S_inv * weights[k];
    precision = 0.5 * (precision + precision.transpose());
    Eigen::LLT<Mat> llt(precision);
    if (llt.info() != Eigen::Success) {
      throw std::invalid_argument("weight " + std::to_string(k) +
                                  " is singular or indefinite: its expert would have no finite "
                                  "covariance");
    }
    Mat cov = llt.solve(Mat::Identity(d, d));
    covariances.push_back(0.5 * (cov + cov.transpose()));
  }
  return covariances;
}

APFEquivalence apf_cep_equivalence(const std::vector<APFComponent> &components,
                                   const JointState &state) {
  if (components.empty()) throw std::invalid_argument("APF needs at least one component");
  const LatentState source = to_latent(state);
  const Eigen::Index n = state.q.size();
  const Mat no_action = Mat::Zero(n, 1);

  std::vector<Vec> means;
  std::vector<Mat> config_weights;
  for (const auto &c : components) {
    const LatentBatch latent = c.map->apply(source, no_action);
    const Vec g = c.dynamics(latent.state);
    const Mat J = c.map->action_jacobian(source, no_action.col(0));
    const Mat J_pinv = damped_pseudoinverse(J);
    means.push_back(J_pinv * g);
    config_weights.push_back(J_pinv * expand_weight(c.weight, g.size()) * J);
  }

  APFEquivalence out;
  out.covariances = covariances_from_weights(config_weights);
  out.cep = gaussian_product(means, out.covariances).mean;
  out.apf = apf_action(components, state);
  out.discrepancy = (out.apf - out.cep).cwiseAbs().maxCoeff();
  return out;
}

EquivalenceProblem random_equivalence_problem(std::size_t dim, std::size_t n_components,
                                              std::uint64_t seed) {
  if (dim == 0 || n_components == 0) {
    throw std::invalid_argument("equivalence problem needs a positive dimension and component count");
  }
  const auto d = static_cast<Eigen::Index>(dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto random_matrix = [&] {
    Mat m(d, d);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = normal(rng);
    return m;
  };
  auto random_vector = [&] {
    Vec v(d);
    for (Eigen::Index i = 0; i < d; ++i) v(i) = normal(rng);
    return v;
  };
  auto random_spd = [&] {
    const Mat a = random_matrix();
    return Mat(a * a.transpose() / static_cast<double>(d) + 0.1 * Mat::Identity(d, d));
  };

  std::vector<Mat> covariances;
  for (std::size_t k = 0; k < n_components; ++k) covariances.push_back(random_spd());
  const std::vector<Mat> weights = weights_from_covariances(covariances);

  EquivalenceProblem out;
  const auto map = std::make_shared<IdentityMap>();
  for (std::size_t k = 0; k < n_components; ++k) {
    const Mat kp = random_spd();
    const Mat kv = random_spd();
    const Vec target = random_vector();
    TaskDynamics g = [kp, kv, target](const LatentState &s) -> Vec {
      return -kp * (s.position - target) - kv * s.velocity;
    };
    out.components.push_back({map, std::move(g), weights[k]});
  }
  out.state = {random_vector(), random_vector()};
  return out;
}

TaskDynamics pd_attractor(Vec target, double kp, double kv) {
  return [target = std::move(target), kp, kv](const LatentState &s) -> Vec {
    return -kp * (s.position - target) - kv * s.velocity;
  };
}

TaskDynamics obstacle_repulsion(Vec center, double radius, double gamma, double gain) {
  return [center = std::move(center), radius, gamma, gain](const LatentState &s) -> Vec {
    const Vec diff = s.position - center;
    const double dist = diff.norm();
    const double rho = dist - radius;
    if (rho > gamma || dist == 0.0) return Vec::Zero(s.position.size());
    const double r = std::max(rho, 1e-3);
    return gain * diff / (dist * r * r);
  };
}

TaskDynamics joint_limit_repulsion(std::vector<JointLimit> limits, double gamma, double gain) {
  return [limits = std::move(limits), gamma, gain](const LatentState &s) -> Vec {
    Vec out = Vec::Zero(s.position.size());
    for (Eigen::Index j = 0; j < s.position.size(); ++j) {
      const auto &lim = limits.at(static_cast<std::size_t>(j));
      const double q = s.position(j);
      const double to_lower = q - lim.lower;
      const double to_upper = lim.upper - q;
      const bool lower_nearer = std::abs(to_lower) <= std::abs(to_upper);
      const double rho = lower_nearer ? to_lower : to_upper;
      if (rho > gamma) continue;
      const double r = std::max(rho, 1e-3);
      out(j) = (lower_nearer ? 1.0 : -1.0) * gain / (r * r);
    }
    return out;
  };
}

TaskDynamics velocity_damping(double gain) {
  return [gain](const LatentState &s) -> Vec { return -gain * s.velocity; };
}

} // namespace cep
