#include "halfmass/metric.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <numbers>
#include <sstream>

#include "halfmass/error.hpp"
#include "halfmass/sampling.hpp"

namespace halfmass {

double sphere_area(int k) {
  const double h = 0.5 * (k + 1);
  return 2.0 * std::pow(std::numbers::pi, h) / std::tgamma(h);
}

SmallMatrix MetricJet::value() const {
  SmallMatrix m(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) m(i, j) = g(i, j);
  return m;
}

namespace {

bool is_zero_field(const ScalarField& f) {
  return !f.valid() || (f.is_constant() && f.constant_value() == 0.0);
}

class FlatSource final : public MetricSource {
 public:
  explicit FlatSource(int n) : n_(n) {}
  MetricJet jet(std::span<const double>) const override {
    MetricJet m(n_);
    for (int i = 0; i < n_; ++i) m(i, i).value = 1.0;
    return m;
  }
  SmallMatrix value(std::span<const double>) const override { return SmallMatrix::Identity(n_, n_); }

 private:
  int n_;
};

class ConformalSource final : public MetricSource {
 public:
  ConformalSource(MetricField base, ScalarField u, bool flat_base)
      : base_(std::move(base)), u_(std::move(u)), flat_base_(flat_base) {}

  MetricJet jet(std::span<const double> x) const override {
    const int n = base_.n;
    const Jet2 u = u_.jet(x);
    if (!(u.value > 0.0)) throw DomainError("conformal factor is not positive");
    const double p = 4.0 / (n - 2);
    const double up = std::pow(u.value, p);
    const Jet2 phi = u.chain(up, p * up / u.value, p * (p - 1.0) * up / (u.value * u.value));
    if (flat_base_) {
      MetricJet m(n);
      for (int i = 0; i < n; ++i) m(i, i) = phi;
      return m;
    }
    MetricJet m = base_.jet(x);
    for (int k = 0; k < packed_size(n); ++k) m.c[k] = phi * m.c[k];
    return m;
  }

  SmallMatrix value(std::span<const double> x) const override {
    const int n = base_.n;
    const double u = u_.value(x);
    if (!(u > 0.0)) throw DomainError("conformal factor is not positive");
    const double phi = std::pow(u, 4.0 / (n - 2));
    if (flat_base_) return phi * SmallMatrix::Identity(n, n);
    return phi * base_.value(x);
  }

 private:
  MetricField base_;
  ScalarField u_;
  bool flat_base_;
};

class PerturbationSource final : public MetricSource {
 public:
  PerturbationSource(int n, std::vector<ScalarField> a) : n_(n), a_(std::move(a)) {}

  MetricJet jet(std::span<const double> x) const override {
    MetricJet m(n_);
    for (int j = 0; j < n_; ++j)
      for (int i = 0; i <= j; ++i) {
        const ScalarField& f = a_[packed_index(i, j)];
        if (!is_zero_field(f)) m(i, j) = f.jet(x);
        if (i == j) m(i, j).value += 1.0;
      }
    return m;
  }

  SmallMatrix value(std::span<const double> x) const override {
    SmallMatrix m = SmallMatrix::Identity(n_, n_);
    for (int j = 0; j < n_; ++j)
      for (int i = 0; i <= j; ++i) {
        const ScalarField& f = a_[packed_index(i, j)];
        if (is_zero_field(f)) continue;
        const double v = f.value(x);
        m(i, j) += v;
        if (i != j) m(j, i) += v;
      }
    return m;
  }

 private:
  int n_;
  std::vector<ScalarField> a_;
};

/// Derivatives of f(Q y + b) with respect to y.
Jet2 transform_jet(const Jet2& j, const SmallMatrix& q) {
  const int n = j.n;
  Jet2 out(n, j.value);
  for (int k = 0; k < n; ++k) {
    double s = 0.0;
    for (int c = 0; c < n; ++c) s += q(c, k) * j.grad[c];
    out.grad[k] = s;
  }
  // (Q^T H Q) in two passes.
  SmallMatrix h(n, n);
  for (int d = 0; d < n; ++d)
    for (int c = 0; c < n; ++c) h(c, d) = j.h(c, d);
  const SmallMatrix t = q.transpose() * h * q;
  for (int l = 0; l < n; ++l)
    for (int k = 0; k <= l; ++k) out.h(k, l) = 0.5 * (t(k, l) + t(l, k));
  return out;
}

class PullbackSource final : public MetricSource {
 public:
  PullbackSource(MetricField base, SmallMatrix q, SmallVector b)
      : base_(std::move(base)), q_(std::move(q)), b_(std::move(b)) {}

  MetricJet jet(std::span<const double> y) const override {
    const int n = base_.n;
    const auto x = image(y);
    const MetricJet src = base_.jet(std::span<const double>(x.data(), static_cast<std::size_t>(n)));
    std::array<Jet2, kMaxPacked> t;
    for (int k = 0; k < packed_size(n); ++k) t[k] = transform_jet(src.c[k], q_);
    MetricJet m(n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i <= j; ++i) {
        Jet2 acc(n);
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) {
            const double w = q_(a, i) * q_(b, j);
            if (w != 0.0) acc += w * t[packed_index(a, b)];
          }
        m(i, j) = acc;
      }
    return m;
  }

  SmallMatrix value(std::span<const double> y) const override {
    const auto x = image(y);
    const SmallMatrix g =
        base_.value(std::span<const double>(x.data(), static_cast<std::size_t>(base_.n)));
    return q_.transpose() * g * q_;
  }

 private:
  std::array<double, kMaxDim> image(std::span<const double> y) const {
    const int n = base_.n;
    std::array<double, kMaxDim> x{};
    for (int a = 0; a < n; ++a) {
      double s = b_.size() ? b_(a) : 0.0;
      for (int i = 0; i < n; ++i) s += q_(a, i) * y[static_cast<std::size_t>(i)];
      x[static_cast<std::size_t>(a)] = s;
    }
    return x;
  }

  MetricField base_;
  SmallMatrix q_;
  SmallVector b_;
};

class BlendSource final : public MetricSource {
 public:
  BlendSource(MetricField base, ScalarField chi) : base_(std::move(base)), chi_(std::move(chi)) {}

  MetricJet jet(std::span<const double> x) const override {
    const int n = base_.n;
    const Jet2 chi = chi_.jet(x);
    MetricJet m(n);
    if (chi.value == 0.0 && is_flat_patch(chi)) {
      for (int i = 0; i < n; ++i) m(i, i).value = 1.0;
      return m;
    }
    m = base_.jet(x);
    for (int i = 0; i < n; ++i) m(i, i).value -= 1.0;
    for (int k = 0; k < packed_size(n); ++k) m.c[k] = chi * m.c[k];
    for (int i = 0; i < n; ++i) m(i, i).value += 1.0;
    return m;
  }

 private:
  static bool is_flat_patch(const Jet2& chi) {
    for (int i = 0; i < chi.n; ++i)
      if (chi.grad[i] != 0.0) return false;
    for (int k = 0; k < packed_size(chi.n); ++k)
      if (chi.hess[k] != 0.0) return false;
    return true;
  }

  MetricField base_;
  ScalarField chi_;
};

class SumSource final : public MetricSource {
 public:
  SumSource(MetricField base, std::vector<ScalarField> k, double t)
      : base_(std::move(base)), k_(std::move(k)), t_(t) {}

  MetricJet jet(std::span<const double> x) const override {
    MetricJet m = base_.jet(x);
    for (int p = 0; p < packed_size(base_.n); ++p)
      if (!is_zero_field(k_[static_cast<std::size_t>(p)]))
        m.c[p] += t_ * k_[static_cast<std::size_t>(p)].jet(x);
    return m;
  }

 private:
  MetricField base_;
  std::vector<ScalarField> k_;
  double t_;
};

void require_dimension(int n) {
  if (n < 3 || n > kMaxDim)
    throw InvalidArgument("dimension must be in [3, " + std::to_string(kMaxDim) + "], got " +
                          std::to_string(n));
}

double sample_base_radius(const MetricField& g) { return std::max(g.r0, 1e-3); }

std::string format_rate(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

}  // namespace

std::vector<double> dyadic_radii(double r0, int first, int last) {
  std::vector<double> out;
  for (int k = first; k <= last; ++k) out.push_back(std::ldexp(r0, k));
  return out;
}

MetricField flat_half_space(int n) {
  require_dimension(n);
  MetricField g;
  g.n = n;
  g.tau = kInfinity;
  g.r0 = 1.0;
  g.conformally_flat = true;
  g.boundary_orthogonal = true;
  g.exact_mass = 0.0;
  g.family = "flat";
  g.source = std::make_shared<FlatSource>(n);
  return g;
}

MetricField half_schwarzschild(int n, double m) {
  require_dimension(n);
  if (!(m > 0.0)) throw InvalidArgument("half-Schwarzschild mass parameter must be positive");
  const double c = 0.5 * m;
  const double e = 2.0 - n;
  ScalarField u = ScalarField::radial(n, [c, e](double r) {
    const double p = c * std::pow(r, e);
    return RadialValue{1.0 + p, e * p / r, e * (e - 1.0) * p / (r * r)};
  });
  MetricField g = conformal(flat_half_space(n), u);
  g.tau = n - 2.0;
  g.r0 = std::pow(c, 1.0 / (n - 2.0));
  g.exact_mass = (n - 1) * sphere_area(n - 1) * m;
  g.family = "half_schwarzschild";
  g.warnings.clear();
  return g;
}

MetricField conformal(const MetricField& g, const ScalarField& u) {
  if (u.dimension() != g.n) throw InvalidArgument("conformal factor dimension mismatch");
  const auto radii = dyadic_radii(sample_base_radius(g), 0, 6);
  std::vector<double> sup(radii.size(), 0.0);
  for (std::size_t k = 0; k < radii.size(); ++k) {
    const PointSet pts = sample_sphere(g.n, radii[k], 64, SphereRegion::UpperHemisphere, 17 + k);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const double v = u.value(pts[i]);
      if (!(v > 0.0)) {
        std::ostringstream os;
        os << "conformal factor u = " << v << " is not positive at a sample point of radius "
           << radii[k];
        throw DomainError(os.str());
      }
      sup[k] = std::max(sup[k], std::abs(v - 1.0));
    }
  }
  MetricField out = g;
  const bool flat_base = g.family == "flat";
  out.source = std::make_shared<ConformalSource>(g, u, flat_base);
  // Only the last three spheres describe the asymptotic rate.
  const std::span<const double> rr(radii.data() + radii.size() - 3, 3);
  const std::span<const double> ss(sup.data() + sup.size() - 3, 3);
  out.tau = std::min(g.tau, fit_decay_rate(rr, ss));
  out.exact_mass.reset();
  out.family = "conformal";
  return out;
}

MetricField perturbation(int n, const std::vector<ScalarField>& a, double tau, double r0) {
  require_dimension(n);
  if (static_cast<int>(a.size()) != packed_size(n))
    throw InvalidArgument("perturbation needs n(n+1)/2 coefficient fields");
  if (!(r0 > 0.0)) throw InvalidArgument("r0 must be positive");
  if (!(tau > 0.0)) throw InvalidArgument("tau must be positive");
  for (const auto& f : a)
    if (f.valid() && f.dimension() != n) throw InvalidArgument("coefficient dimension mismatch");

  MetricField g;
  g.n = n;
  g.tau = tau;
  g.r0 = r0;
  g.family = "perturbation";
  g.source = std::make_shared<PerturbationSource>(n, a);
  bool all_zero = true;
  for (const auto& f : a) all_zero = all_zero && is_zero_field(f);
  g.conformally_flat = all_zero;

  check_positive_definite(g);

  bool orthogonal = true;
  for (int alpha = 0; alpha < n - 1 && orthogonal; ++alpha) {
    const ScalarField& f = a[packed_index(alpha, n - 1)];
    if (is_zero_field(f)) continue;
    for (double r : dyadic_radii(r0, 0, 6)) {
      const PointSet pts = sample_sphere(n, r, 64, SphereRegion::Equator, 91);
      for (std::size_t i = 0; i < pts.size() && orthogonal; ++i)
        if (f.value(pts[i]) != 0.0) orthogonal = false;
    }
  }
  g.boundary_orthogonal = orthogonal;

  const MetricDecay d = sampled_decay(g);
  constexpr double slack = 0.25;
  if (d.rate0 < tau - slack)
    g.warnings.push_back("measured decay of g - delta is r^-" + format_rate(d.rate0) +
                         ", slower than the declared tau = " + format_rate(tau));
  if (d.rate1 < tau + 1.0 - slack)
    g.warnings.push_back("measured decay of dg is r^-" + format_rate(d.rate1) +
                         ", slower than r^-(tau+1)");
  if (d.rate2 < tau + 2.0 - slack)
    g.warnings.push_back("measured decay of d^2 g is r^-" + format_rate(d.rate2) +
                         ", slower than r^-(tau+2)");
  return g;
}

MetricField pullback_rigid(const MetricField& g, const SmallMatrix& q, const SmallVector& b) {
  const int n = g.n;
  if (q.rows() != n || q.cols() != n || b.size() != n)
    throw InvalidArgument("rigid motion has the wrong dimension");
  if ((q.transpose() * q - SmallMatrix::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-12)
    throw InvalidArgument("Q is not orthogonal");
  SmallVector en = SmallVector::Zero(n);
  en(n - 1) = 1.0;
  if ((q * en - en).cwiseAbs().maxCoeff() > 1e-12) throw InvalidArgument("Q does not fix e_n");
  if (b(n - 1) != 0.0) throw InvalidArgument("translation must be tangent to the boundary");
  MetricField out = g;
  out.source = std::make_shared<PullbackSource>(g, q, b);
  out.r0 = g.r0 + b.norm();
  out.exact_mass.reset();
  out.family = g.family + "+rigid";
  return out;
}

MetricField pullback_orthogonal(const MetricField& g, const SmallMatrix& q) {
  MetricField out = g;
  out.source = std::make_shared<PullbackSource>(g, q, SmallVector::Zero(g.n));
  out.exact_mass.reset();
  return out;
}

RigidMotion random_rigid_motion(int n, std::uint64_t seed, double max_shift) {
  require_dimension(n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  SmallMatrix a(n - 1, n - 1);
  for (int j = 0; j < n - 1; ++j)
    for (int i = 0; i < n - 1; ++i) a(i, j) = normal(rng);
  Eigen::HouseholderQR<SmallMatrix> qr(a);
  SmallMatrix q = qr.householderQ();
  // Haar measure: fix column signs by the diagonal of R, then force det = 1.
  const SmallMatrix r = qr.matrixQR();
  for (int j = 0; j < n - 1; ++j)
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  if (q.determinant() < 0.0) q.col(0) *= -1.0;

  RigidMotion m;
  m.q = SmallMatrix::Identity(n, n);
  m.q.topLeftCorner(n - 1, n - 1) = q;
  m.b = SmallVector::Zero(n);
  SmallVector dir(n - 1);
  for (int i = 0; i < n - 1; ++i) dir(i) = normal(rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  m.b.head(n - 1) = dir.normalized() * (max_shift * unit(rng));
  return m;
}

MetricField blend_with_flat(const MetricField& g, const ScalarField& chi) {
  MetricField out = g;
  out.source = std::make_shared<BlendSource>(g, chi);
  out.exact_mass.reset();
  out.family = "blend";
  return out;
}

MetricField add_tensor(const MetricField& g, const std::vector<ScalarField>& k, double t) {
  if (static_cast<int>(k.size()) != packed_size(g.n))
    throw InvalidArgument("tensor needs n(n+1)/2 coefficient fields");
  MetricField out = g;
  out.source = std::make_shared<SumSource>(g, k, t);
  out.exact_mass.reset();
  out.conformally_flat = false;
  out.family = "sum";
  return out;
}

bool is_positive_definite(const MetricField& g, std::span<const double> x) {
  const SmallMatrix m = g.value(x);
  Eigen::LLT<SmallMatrix> llt(m);
  return llt.info() == Eigen::Success;
}

MetricDecay sampled_decay(const MetricField& g, int levels, std::size_t points) {
  MetricDecay d;
  d.radii = dyadic_radii(sample_base_radius(g), 1, levels);
  const int n = g.n;
  for (std::size_t k = 0; k < d.radii.size(); ++k) {
    const PointSet pts = sample_sphere(n, d.radii[k], points, SphereRegion::UpperHemisphere, 3 + k);
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (std::size_t p = 0; p < pts.size(); ++p) {
      const MetricJet m = g.jet(pts[p]);
      for (int j = 0; j < n; ++j)
        for (int i = 0; i <= j; ++i) {
          const Jet2& c = m(i, j);
          s0 = std::max(s0, std::abs(c.value - (i == j ? 1.0 : 0.0)));
          for (int a = 0; a < n; ++a) s1 = std::max(s1, std::abs(c.grad[a]));
          for (int q = 0; q < packed_size(n); ++q) s2 = std::max(s2, std::abs(c.hess[q]));
        }
    }
    d.sup0.push_back(s0);
    d.sup1.push_back(s1);
    d.sup2.push_back(s2);
  }
  // The asymptotic rate is read off the outer half of the spheres.
  const std::size_t from = d.radii.size() / 2;
  const std::span<const double> rr(d.radii.data() + from, d.radii.size() - from);
  auto tail = [&](const std::vector<double>& v) {
    return std::span<const double>(v.data() + from, v.size() - from);
  };
  constexpr double floor = 1e-300;
  d.rate0 = fit_decay_rate(rr, tail(d.sup0), floor);
  d.rate1 = fit_decay_rate(rr, tail(d.sup1), floor);
  d.rate2 = fit_decay_rate(rr, tail(d.sup2), floor);
  return d;
}

void check_positive_definite(const MetricField& g, int levels, std::size_t points) {
  for (double r : dyadic_radii(sample_base_radius(g), 0, levels)) {
    for (auto region : {SphereRegion::UpperHemisphere, SphereRegion::Equator}) {
      const PointSet pts = sample_sphere(g.n, r, points, region, 5);
      for (std::size_t p = 0; p < pts.size(); ++p)
        if (!is_positive_definite(g, pts[p])) {
          std::ostringstream os;
          os << "metric is not positive definite at a sample point of radius " << r;
          throw MetricError(os.str());
        }
    }
  }
}

}  // namespace halfmass
