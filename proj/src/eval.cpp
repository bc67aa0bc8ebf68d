#include "cure/eval.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "cure/errors.hpp"

namespace cure {

EvalReport::EvalReport()
    : excess_risk(std::numeric_limits<double>::quiet_NaN()),
      estimation_error(std::numeric_limits<double>::quiet_NaN()) {}

int classify(const Gamma& g, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != g.beta.size()) throw DimensionError("classify: dimension mismatch");
  return g.embed(x) >= 0.0 ? 1 : -1;
}

namespace {

Eigen::VectorXi predict(const Gamma& g, const Eigen::MatrixXd& x) {
  if (x.cols() != g.beta.size()) throw DimensionError("classify: dimension mismatch");
  Eigen::VectorXd z = x * g.beta;
  Eigen::VectorXi out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = z(i) + g.alpha >= 0.0 ? 1 : -1;
  return out;
}

}  // namespace

EvalReport label_misclass(const Eigen::VectorXi& predicted, const Dataset& ds) {
  if (!ds.labels) throw ValidationError("evaluation requires labels");
  if (predicted.size() != ds.n()) throw DimensionError("evaluation: prediction count differs from n");
  const Eigen::Index wrong = (predicted.array() != ds.labels->array()).count();
  const Eigen::Index n = ds.n();
  EvalReport rep;
  // Ties prefer s = +1.
  if (wrong <= n - wrong) {
    rep.sign = 1;
    rep.misclass_rate = static_cast<double>(wrong) / n;
  } else {
    rep.sign = -1;
    rep.misclass_rate = static_cast<double>(n - wrong) / n;
  }
  return rep;
}

EvalReport empirical_misclass(const Gamma& g, const Dataset& ds) {
  if (!ds.labels) throw ValidationError("evaluation requires labels");
  return label_misclass(predict(g, ds.x), ds);
}

namespace {

constexpr Eigen::Index kChunk = 100000;

}  // namespace

McRisk population_misclass_mc(const Gamma& g, const MixtureParams& params, Eigen::Index n_mc,
                              std::uint64_t seed) {
  if (n_mc < 10000) throw ValidationError("population_misclass_mc: n_mc must be at least 10^4");
  Eigen::Index wrong = 0;
  Eigen::Index done = 0;
  std::uint64_t chunk = 0;
  while (done < n_mc) {
    const Eigen::Index m = std::min(kChunk, n_mc - done);
    const Dataset ds = sample(params, m, derive_seed(seed, chunk++));
    wrong += (predict(g, ds.x).array() != ds.labels->array()).count();
    done += m;
  }
  McRisk out;
  double rate = static_cast<double>(wrong) / n_mc;
  if (rate > 0.5) {
    rate = 1.0 - rate;
    out.sign = -1;
  }
  out.rate = rate;
  out.std_error = std::sqrt(rate * (1.0 - rate) / n_mc);
  return out;
}

McRisk paired_excess_risk_mc(const Gamma& g, const Gamma& reference, const MixtureParams& params,
                             Eigen::Index n_mc, std::uint64_t seed) {
  if (n_mc < 10000) throw ValidationError("paired_excess_risk_mc: n_mc must be at least 10^4");
  // Per draw: bit 0 = g errs, bit 1 = reference errs (both with sign +1).
  std::vector<std::uint8_t> codes;
  codes.reserve(static_cast<std::size_t>(n_mc));
  Eigen::Index err_g = 0, err_r = 0;
  Eigen::Index done = 0;
  std::uint64_t chunk = 0;
  while (done < n_mc) {
    const Eigen::Index m = std::min(kChunk, n_mc - done);
    const Dataset ds = sample(params, m, derive_seed(seed, chunk++));
    const Eigen::VectorXi pg = predict(g, ds.x);
    const Eigen::VectorXi pr = predict(reference, ds.x);
    for (Eigen::Index i = 0; i < m; ++i) {
      const int eg = pg(i) != (*ds.labels)(i);
      const int er = pr(i) != (*ds.labels)(i);
      err_g += eg;
      err_r += er;
      codes.push_back(static_cast<std::uint8_t>(eg | (er << 1)));
    }
    done += m;
  }
  const int sg = 2 * err_g <= n_mc ? 1 : -1;
  const int sr = 2 * err_r <= n_mc ? 1 : -1;
  double sum = 0.0, sum_sq = 0.0;
  for (const auto c : codes) {
    const int eg = sg == 1 ? (c & 1) : 1 - (c & 1);
    const int er = sr == 1 ? (c >> 1) : 1 - (c >> 1);
    const double dv = eg - er;
    sum += dv;
    sum_sq += dv * dv;
  }
  const double n = static_cast<double>(n_mc);
  const double mean = sum / n;
  McRisk out;
  out.sign = sg;
  out.rate = mean;
  out.std_error = std::sqrt(std::max(0.0, sum_sq / n - mean * mean) / n);
  return out;
}

Gamma pca_baseline(const Dataset& ds) {
  if (ds.n() < 2) throw ValidationError("pca: needs at least two samples");
  const Eigen::VectorXd mean = ds.x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = ds.x.rowwise() - mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(ds.n() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericalError("pca: eigensolver failed");
  const Eigen::Index top = cov.rows() - 1;
  if (!(eig.eigenvalues()(top) > 0.0)) throw ValidationError("pca: data has rank 0");
  Eigen::VectorXd v = eig.eigenvectors().col(top);
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (v(j) != 0.0) {
      if (v(j) < 0.0) v = -v;
      break;
    }
  }
  return {-v.dot(mean), v};
}

Eigen::VectorXi kmeans_baseline(const Dataset& ds, std::uint64_t seed, int restarts) {
  const Eigen::Index n = ds.n();
  if (n < 2) throw ValidationError("kmeans: needs at least two samples");
  const Eigen::MatrixXd& x = ds.x;
  std::mt19937_64 rng(seed);

  double best_inertia = std::numeric_limits<double>::infinity();
  Eigen::VectorXi best(n);
  Eigen::VectorXi assign(n);
  Eigen::VectorXd dist(n);

  for (int run = 0; run < restarts; ++run) {
    // k-means++ seeding.
    Eigen::MatrixXd centers(2, x.cols());
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    centers.row(0) = x.row(pick(rng));
    dist = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
    const double total = dist.sum();
    if (total > 0.0) {
      std::discrete_distribution<Eigen::Index> weighted(dist.data(), dist.data() + n);
      centers.row(1) = x.row(weighted(rng));
    } else {
      centers.row(1) = x.row(pick(rng));
    }

    double inertia = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 300; ++it) {
      const Eigen::VectorXd d0 = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
      const Eigen::VectorXd d1 = (x.rowwise() - centers.row(1)).rowwise().squaredNorm();
      bool changed = false;
      double cur = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const int a = d1(i) < d0(i) ? 1 : 0;
        if (it == 0 || a != assign(i)) changed = true;
        assign(i) = a;
        cur += a ? d1(i) : d0(i);
      }
      inertia = cur;
      if (!changed) break;
      for (int k = 0; k < 2; ++k) {
        Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(x.cols());
        Eigen::Index count = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (assign(i) == k) {
            sum += x.row(i);
            ++count;
          }
        }
        if (count > 0) centers.row(k) = sum / static_cast<double>(count);
      }
    }
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best = assign;
    }
  }
  Eigen::VectorXi labels(n);
  for (Eigen::Index i = 0; i < n; ++i) labels(i) = best(i) == 0 ? 1 : -1;
  return labels;
}

}  // namespace cure
