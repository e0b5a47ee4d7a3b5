#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace oscnet {

/// Uniformly sampled scalar position series.
struct Trajectory {
    std::vector<double> samples;
    double delta = 0.0;  ///< sampling step [s], > 0
    double t0 = 0.0;     ///< time of samples[0] [s]

    std::size_t size() const { return samples.size(); }
    double time_at(std::size_t i) const { return t0 + static_cast<double>(i) * delta; }
    double back() const { return samples.back(); }
};

inline void validate_trajectory(const Trajectory& x, std::size_t min_len = 3) {
    if (!(x.delta > 0.0))
        throw std::invalid_argument("Trajectory: delta must be > 0");
    if (x.samples.size() < min_len)
        throw std::invalid_argument("Trajectory: need at least " + std::to_string(min_len) +
                                    " samples, got " + std::to_string(x.samples.size()));
    for (double v : x.samples)
        if (!std::isfinite(v)) throw std::invalid_argument("Trajectory: non-finite sample");
}

/// Physical constants of one oscillator, SI units.
struct CanonicalWeights {
    double mass;     ///< kg, > 0
    double damping;  ///< kg/s, >= 0
    double spring;   ///< kg/s^2, > 0
};

inline void validate(const CanonicalWeights& w) {
    if (!(w.mass > 0.0) || !std::isfinite(w.mass))
        throw std::invalid_argument("CanonicalWeights: mass must be > 0");
    if (!(w.damping >= 0.0) || !std::isfinite(w.damping))
        throw std::invalid_argument("CanonicalWeights: damping must be >= 0");
    if (!(w.spring > 0.0) || !std::isfinite(w.spring))
        throw std::invalid_argument("CanonicalWeights: spring must be > 0");
}

/// Wall-to-free chain; element 0 hangs off the wall, spring i couples mass i-1 to mass i.
using ChainSystem = std::vector<CanonicalWeights>;

inline void validate(const ChainSystem& chain) {
    if (chain.empty()) throw std::invalid_argument("ChainSystem: empty");
    for (const auto& w : chain) validate(w);
}

/// Unit-normalized step-map parameters for the two-oscillator system.
/// Carries only 1/s and 1/s^2 units, so the trainable magnitudes stay O(1)
/// regardless of the physical scale.
struct CombinedWeights {
    double a;  ///< delta^2 k2 / m1   [1/s^2]
    double b;  ///< delta^2 k2 / m2   [1/s^2]
    double c;  ///< delta b1 / m1     [1/s]
    double d;  ///< delta b2 / m2     [1/s]
    double e;  ///< (k1 + k2) / k2    [dimensionless]
};

inline void validate(const CombinedWeights& u) {
    if (!(u.a > 0.0) || !(u.b > 0.0))
        throw std::invalid_argument("CombinedWeights: a and b must be > 0");
    if (!(u.c >= 0.0) || !(u.d >= 0.0))
        throw std::invalid_argument("CombinedWeights: c and d must be >= 0");
    if (!(u.e >= 1.0))
        throw std::invalid_argument("CombinedWeights: e must be >= 1");
}

/// Exact conversion from two oscillators' physical constants to the combined set.
inline CombinedWeights canonical_to_combined(const CanonicalWeights& w1,
                                             const CanonicalWeights& w2, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("canonical_to_combined: delta must be > 0");
    validate(w1);
    validate(w2);
    const double d2 = delta * delta;
    return CombinedWeights{
        d2 * w2.spring / w1.mass,
        d2 * w2.spring / w2.mass,
        delta * w1.damping / w1.mass,
        delta * w2.damping / w2.mass,
        (w1.spring + w2.spring) / w2.spring,
    };
}

/// Backward finite-difference coefficients; index 0 is the oldest grid point,
/// the last index is the current time. Dividing the convolution output by
/// delta^derivative_order yields the derivative estimate.
struct Stencil {
    int derivative_order;  ///< 1 or 2
    int accuracy_order;    ///< >= 1
    std::vector<double> coefficients;

    std::size_t length() const { return coefficients.size(); }
};

enum class Padding { causal, valid };

inline const char* to_string(Padding p) { return p == Padding::causal ? "causal" : "valid"; }

inline Padding padding_from_string(const std::string& s) {
    if (s == "causal") return Padding::causal;
    if (s == "valid") return Padding::valid;
    throw std::invalid_argument("unknown padding mode: " + s);
}

/// Fixed-stencil projection x2 = alpha*D2(x1) + beta*D1(x1) + gamma*x1.
/// The 1/delta^k scaling of the derivative estimates is folded into alpha and
/// beta, so the stencil outputs stay raw coefficient convolutions.
struct ProjectionParams {
    double alpha;
    double beta;
    double gamma;
};

/// Free convolution kernel replacing the projection; index 0 is the oldest tap.
using WideKernel = std::vector<double>;

/// Configuration of the observed-to-hidden reconstruction. Exactly one of the
/// two weight forms is active.
struct MappingParams {
    std::variant<ProjectionParams, WideKernel> weights;
    Padding padding = Padding::valid;
    int stencil_accuracy = 5;  ///< in [1, 8]

    bool is_projection() const { return std::holds_alternative<ProjectionParams>(weights); }
    const ProjectionParams& projection() const { return std::get<ProjectionParams>(weights); }
    const WideKernel& kernel() const { return std::get<WideKernel>(weights); }
};

inline void validate(const MappingParams& p) {
    if (p.stencil_accuracy < 1 || p.stencil_accuracy > 8)
        throw std::invalid_argument("MappingParams: stencil_accuracy must be in [1, 8]");
    if (!p.is_projection()) {
        if (p.kernel().empty() || p.kernel().size() % 2 == 0)
            throw std::invalid_argument("MappingParams: wide kernel length must be odd");
    }
}

/// Projection coefficients implied by the chain physics: alpha = m1/(k2 delta^2),
/// beta = b1/(k2 delta), gamma = (k1+k2)/k2.
inline ProjectionParams projection_from_canonical(const CanonicalWeights& w1, double k2,
                                                  double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("projection_from_canonical: delta must be > 0");
    if (k2 == 0.0) throw std::domain_error("projection_from_canonical: k2 must be nonzero");
    return ProjectionParams{
        w1.mass / (k2 * delta * delta),
        w1.damping / (k2 * delta),
        (w1.spring + k2) / k2,
    };
}

/// Training left the state band around the data; carries the first bad iteration.
class TrainingDivergedError : public std::runtime_error {
  public:
    TrainingDivergedError(long iteration, const std::string& what)
        : std::runtime_error(what), iteration_(iteration) {}
    long iteration() const { return iteration_; }

  private:
    long iteration_;
};

/// A free-running forecast exceeded the divergence guard band.
class ForecastDivergedError : public std::runtime_error {
  public:
    ForecastDivergedError(long step, const std::string& what)
        : std::runtime_error(what), step_(step) {}
    long step() const { return step_; }

  private:
    long step_;
};

}  // namespace oscnet
