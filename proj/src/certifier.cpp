#include "saddlestab/certifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "saddlestab/parallel.hpp"

namespace saddlestab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Nearest {
  const KnownMinimum* minimum = nullptr;
  Vector image;
  double dist2 = kInf;
};

Nearest nearest_minimum(const Vector& w, std::span<const KnownMinimum> minima, Symmetry symmetry) {
  Nearest best;
  for (const KnownMinimum& m : minima) {
    for (Vector& image : symmetric_images(m.point, symmetry)) {
      const double d = distance(w, image);
      if (d * d < best.dist2) {
        best.dist2 = d * d;
        best.minimum = &m;
        best.image = std::move(image);
      }
    }
  }
  return best;
}

}  // namespace

void SaddleParams::validate() const {
  if (!(alpha > 0.0) || !(gamma > 0.0) || !(tau > 0.0)) {
    throw std::invalid_argument("saddle parameters must be strictly positive");
  }
  if (nu && !(*nu > 0.0)) throw std::invalid_argument("nu must be strictly positive when set");
}

SaddleParams SaddleParams::scaled_by(double s) const {
  SaddleParams p = *this;
  p.alpha *= s;
  p.gamma *= s;
  p.tau *= s;
  return p;
}

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::kLargeGradient: return "large-gradient";
    case Regime::kNegativeCurvature: return "negative-curvature";
    case Regime::kStronglyConvexRegion: return "strongly-convex-region";
    case Regime::kUnclassified: return "unclassified";
  }
  return "unknown";
}

std::vector<KnownMinimum> evaluate_minima(const Objective& objective,
                                          const std::vector<Vector>& points) {
  std::vector<KnownMinimum> out;
  out.reserve(points.size());
  for (const Vector& p : points) out.push_back({p, objective.value(p)});
  return out;
}

bool sandwich_holds(double slack, double value_scale) {
  return slack >= -kSlackTolerance * std::max(1.0, std::abs(value_scale));
}

SaddleClassification classify_point(const LagrangianState& state, const SaddleParams& params,
                                    std::span<const KnownMinimum> minima, Symmetry symmetry) {
  params.validate();
  SaddleClassification out;
  out.gradient_norm = state.gradient_norm();
  out.min_curvature = state.min_curvature;
  out.upper_slack = kNaN;
  out.lower_slack = kNaN;

  bool sandwich = false;
  if (!minima.empty()) {
    const Nearest near = nearest_minimum(state.point, minima, symmetry);
    out.nearest_minimum = near.image;
    const double gap = state.lagrangian_value - near.minimum->value;
    out.upper_slack = out.gradient_norm * out.gradient_norm / (2.0 * params.alpha) - gap;
    out.lower_slack = gap - 0.5 * params.alpha * near.dist2;
    const bool within_nu = !params.nu || std::sqrt(near.dist2) <= *params.nu;
    sandwich = within_nu && sandwich_holds(out.upper_slack, state.lagrangian_value) &&
               sandwich_holds(out.lower_slack, state.lagrangian_value);
  }

  if (out.gradient_norm >= params.tau) {
    out.regime = Regime::kLargeGradient;
    out.witness = out.gradient_norm;
  } else if (out.min_curvature <= -params.gamma) {
    out.regime = Regime::kNegativeCurvature;
    out.witness = out.min_curvature;
  } else if (sandwich) {
    out.regime = Regime::kStronglyConvexRegion;
    out.witness = std::min(out.upper_slack, out.lower_slack);
  } else {
    out.regime = Regime::kUnclassified;
    double best = std::max(out.gradient_norm - params.tau, -params.gamma - out.min_curvature);
    if (!minima.empty()) best = std::max(best, std::min(out.upper_slack, out.lower_slack));
    out.witness = best;
  }
  return out;
}

SaddleClassification unconstrained_classify(const Vector& w, const Objective& objective,
                                            const SaddleParams& params,
                                            std::span<const KnownMinimum> minima,
                                            Symmetry symmetry) {
  params.validate();
  SaddleClassification out;
  out.gradient_norm = norm(objective.gradient(w));
  out.min_curvature = min_eigenvalue(objective.hessian(w));
  out.upper_slack = kNaN;
  out.lower_slack = kNaN;

  double segment_curvature = -kInf;
  bool convex_region = false;
  if (!minima.empty()) {
    const Nearest near = nearest_minimum(w, minima, symmetry);
    out.nearest_minimum = near.image;
    segment_curvature = kInf;
    for (int k = 0; k < kSegmentSamples; ++k) {
      const double t = static_cast<double>(k) / (kSegmentSamples - 1);
      Vector p = scaled(w, 1.0 - t);
      axpy(t, near.image, p);
      segment_curvature = std::min(segment_curvature, min_eigenvalue(objective.hessian(p)));
    }
    const bool within_nu = !params.nu || std::sqrt(near.dist2) <= *params.nu;
    convex_region = within_nu && segment_curvature >= params.alpha;
  }

  if (out.gradient_norm >= params.tau) {
    out.regime = Regime::kLargeGradient;
    out.witness = out.gradient_norm;
  } else if (out.min_curvature <= -params.gamma) {
    out.regime = Regime::kNegativeCurvature;
    out.witness = out.min_curvature;
  } else if (convex_region) {
    out.regime = Regime::kStronglyConvexRegion;
    out.witness = segment_curvature;
  } else {
    out.regime = Regime::kUnclassified;
    out.witness = std::max({out.gradient_norm - params.tau, -params.gamma - out.min_curvature,
                            segment_curvature - params.alpha});
  }
  return out;
}

nlohmann::json CertificationReport::to_json() const {
  nlohmann::json j;
  j["sampled"] = sampled;
  j["certified"] = certified();
  j["counts"] = {{"large_gradient", large_gradient},
                 {"negative_curvature", negative_curvature},
                 {"strongly_convex_region", strongly_convex},
                 {"unclassified", unclassified}};
  nlohmann::json list = nlohmann::json::array();
  for (const Counterexample& c : counterexamples) {
    list.push_back({{"point", c.point},
                    {"witness", c.classification.witness},
                    {"gradient_norm", c.classification.gradient_norm},
                    {"min_curvature", c.classification.min_curvature},
                    {"upper_slack", c.classification.upper_slack},
                    {"lower_slack", c.classification.lower_slack}});
  }
  j["counterexamples"] = std::move(list);
  return j;
}

CertificationReport certify_region(const Objective& objective, const ConstraintSet& constraints,
                                   const SaddleParams& params, const PointSampler& sampler,
                                   std::size_t count, std::span<const KnownMinimum> minima,
                                   const CertifyOptions& options) {
  params.validate();
  std::vector<Vector> points(count);
  std::vector<SaddleClassification> results(count);
  parallel_for(count, options.jobs, [&](std::size_t k) {
    Rng rng(derive_seed(options.seed, k));
    points[k] = sampler(rng);
    const LagrangianState st = lagrangian_state(objective, constraints, points[k]);
    results[k] = classify_point(st, params, minima, options.symmetry);
  });

  CertificationReport report;
  report.sampled = count;
  for (std::size_t k = 0; k < count; ++k) {
    switch (results[k].regime) {
      case Regime::kLargeGradient: ++report.large_gradient; break;
      case Regime::kNegativeCurvature: ++report.negative_curvature; break;
      case Regime::kStronglyConvexRegion: ++report.strongly_convex; break;
      case Regime::kUnclassified:
        ++report.unclassified;
        report.counterexamples.push_back({points[k], results[k]});
        break;
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Parameter estimation

namespace {

struct PointGeometry {
  Vector point;
  double gradient_norm = 0.0;
  double min_curvature = 0.0;
  /// Largest α for which the sandwich holds at this point.
  double alpha_limit = 0.0;
};

// Below this squared distance the two finite-difference-like ratios lose
// their digits, so the local curvature at the minimum is used instead.
constexpr double kLocalDistance2 = 1e-12;

double sandwich_alpha_limit(const LagrangianState& st, std::span<const KnownMinimum> minima,
                            Symmetry symmetry) {
  if (minima.empty()) return 0.0;
  const Nearest near = nearest_minimum(st.point, minima, symmetry);
  if (near.dist2 < kLocalDistance2) return std::max(0.0, st.min_curvature);
  const double gap = st.lagrangian_value - near.minimum->value;
  if (!(gap > 0.0)) return 0.0;
  const double g2 = st.gradient_norm() * st.gradient_norm();
  return std::min(2.0 * gap / near.dist2, g2 / (2.0 * gap));
}

}  // namespace

PointSampler sphere_sampler_near_minima(std::size_t dim, std::vector<Vector> minima) {
  if (minima.empty()) throw std::invalid_argument("sphere_sampler_near_minima: no minima");
  for (const Vector& m : minima)
    if (m.size() != dim) throw std::invalid_argument("sphere_sampler_near_minima: dimension mismatch");
  return [dim, minima = std::move(minima)](Rng& rng) {
    if (rng.uniform() < 0.5) return rng.unit_sphere(dim);
    const Vector& m = minima[rng.index(minima.size())];
    const double sign = rng.rademacher();
    const double radius = std::pow(10.0, rng.uniform(-3.0, 0.0));
    Vector w = scaled(m, sign);
    axpy(radius, rng.unit_sphere(dim), w);
    return normalized(w);
  };
}

SaddleParams estimate_saddle_params(const Objective& objective, const ConstraintSet& constraints,
                                    const PointSampler& sampler, std::size_t count,
                                    std::span<const KnownMinimum> minima,
                                    const CertifyOptions& options) {
  if (minima.empty()) throw std::invalid_argument("estimate_saddle_params: no minima supplied");
  if (count == 0) throw std::invalid_argument("estimate_saddle_params: no sample points");

  std::vector<PointGeometry> geo(count);
  parallel_for(count, options.jobs, [&](std::size_t k) {
    Rng rng(derive_seed(options.seed, k));
    const Vector p = sampler(rng);
    const LagrangianState st = lagrangian_state(objective, constraints, p);
    geo[k] = {st.point, st.gradient_norm(), st.min_curvature,
              sandwich_alpha_limit(st, minima, options.symmetry)};
  });

  double tau_scale = 0.0;
  double gamma_scale = 0.0;
  for (const PointGeometry& g : geo) {
    tau_scale = std::max(tau_scale, g.gradient_norm);
    if (std::isfinite(g.min_curvature)) gamma_scale = std::max(gamma_scale, std::abs(g.min_curvature));
  }
  if (!(tau_scale > 0.0)) tau_scale = 1.0;
  if (!(gamma_scale > 0.0)) gamma_scale = 1.0;

  auto grid_value = [](double scale, int k) {
    const double lo = std::log10(kParamGridLow);
    const double hi = std::log10(kParamGridHigh);
    return scale * std::pow(10.0, lo + (hi - lo) * k / (kParamGridSteps - 1));
  };
  const double alpha_cap = grid_value(std::max(tau_scale, gamma_scale), kParamGridSteps - 1);

  double best_score = 0.0;
  SaddleParams best;
  std::size_t worst_index = 0;
  for (int it = 0; it < kParamGridSteps; ++it) {
    const double tau = grid_value(tau_scale, it);
    for (int ig = 0; ig < kParamGridSteps; ++ig) {
      const double gamma = grid_value(gamma_scale, ig);
      double alpha = alpha_cap;
      std::size_t limiting = 0;
      for (std::size_t k = 0; k < geo.size(); ++k) {
        const PointGeometry& g = geo[k];
        if (g.gradient_norm >= tau || g.min_curvature <= -gamma) continue;
        if (g.alpha_limit < alpha) {
          alpha = g.alpha_limit;
          limiting = k;
        }
      }
      const double score = std::min({tau, gamma, alpha});
      if (score > best_score) {
        best_score = score;
        best = SaddleParams{alpha, gamma, tau, std::nullopt};
      }
      if (best_score == 0.0) worst_index = limiting;
    }
  }
  if (!(best_score > 0.0)) {
    throw NoFeasibleParams("estimate_saddle_params: no parameter triple certifies the sample",
                           geo[worst_index].point);
  }

  const CertificationReport check =
      certify_region(objective, constraints, best, sampler, count, minima, options);
  if (!check.certified()) {
    throw NoFeasibleParams("estimate_saddle_params: selected triple failed re-certification",
                           check.counterexamples.front().point);
  }
  return best;
}

}  // namespace saddlestab
