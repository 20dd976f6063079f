// Divergence-free trigonometric basis on the unit torus: mode indexing,
// eigenvalues of the (shifted) Laplacian, pointwise evaluation, spectral
// derivatives, and projection bookkeeping.
#pragma once

#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace torusns {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kFourPiSq = 4.0 * std::numbers::pi * std::numbers::pi;

// Thrown when a computation produces or would consume a non-finite value.
class numeric_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The two families of basis vectors: the constant field (0,1) and the
// sine/cosine vector modes e(k,l) (which include the constant field (1,0)
// as e(0,0)).
enum class Variant : std::uint8_t { E001 = 0, Vec0 = 1 };

inline const char* variant_name(Variant v) {
    return v == Variant::E001 ? "e001" : "vec0";
}

// One element of the divergence-free basis, identified by (variant, k, l).
// E001 forces k = l = 0.  The ordering (variant, k, l), E001 first, is the
// canonical order every coefficient vector and file format follows.
struct ModeIndex {
    Variant variant = Variant::Vec0;
    std::int32_t k = 0;
    std::int32_t l = 0;

    static ModeIndex e001() { return {Variant::E001, 0, 0}; }
    static ModeIndex vec0(std::int32_t k, std::int32_t l) {
        return {Variant::Vec0, k, l};
    }

    friend auto operator<=>(const ModeIndex&, const ModeIndex&) = default;
};

inline void validate(const ModeIndex& m) {
    if (m.variant == Variant::E001 && (m.k != 0 || m.l != 0))
        throw std::invalid_argument("ModeIndex: e001 requires k = l = 0");
}

// Shift and weight parameters of the linear operator: eigenvalues are
// epsilon_shift + 4 pi^2 (k^2 + l^2), and fractional-space norms weight
// coefficients by (kappa + lambda)^r.
struct SpectralParams {
    double epsilon_shift = 1.0;
    double kappa = 0.0;
};

inline void validate(const SpectralParams& p) {
    if (!(p.epsilon_shift > 0.0))
        throw std::invalid_argument("SpectralParams: epsilon_shift must satisfy epsilon_shift > 0");
    if (!(p.kappa >= 0.0))
        throw std::invalid_argument("SpectralParams: kappa must satisfy kappa >= 0");
}

inline double eigenvalue(const ModeIndex& mode, const SpectralParams& params) {
    if (mode.variant == Variant::E001 || (mode.k == 0 && mode.l == 0))
        return params.epsilon_shift;
    const double s = double(mode.k) * mode.k + double(mode.l) * mode.l;
    return params.epsilon_shift + kFourPiSq * s;
}

// The resolution-n mode set: e001 plus all vector modes with k^2 + l^2 < n^2,
// in canonical order.  Mode lists are shared (immutable) so copies are cheap.
struct ModeSet {
    int n = 0;
    std::shared_ptr<const std::vector<ModeIndex>> modes;

    std::size_t size() const { return modes ? modes->size() : 0; }
    const ModeIndex& operator[](std::size_t i) const { return (*modes)[i]; }
    auto begin() const { return modes->begin(); }
    auto end() const { return modes->end(); }

    friend bool operator==(const ModeSet& a, const ModeSet& b) { return a.n == b.n; }
};

inline ModeSet build_mode_set(int n) {
    if (n < 1) throw std::invalid_argument("build_mode_set: n must satisfy n >= 1");

    static std::mutex cache_mutex;
    static std::vector<std::shared_ptr<const std::vector<ModeIndex>>> cache;
    {
        std::scoped_lock lock(cache_mutex);
        if (n < static_cast<int>(cache.size()) && cache[n])
            return ModeSet{n, cache[n]};
    }

    std::vector<ModeIndex> modes;
    modes.push_back(ModeIndex::e001());
    const std::int64_t bound = std::int64_t(n) * n;
    for (std::int32_t k = -(n - 1); k <= n - 1; ++k)
        for (std::int32_t l = -(n - 1); l <= n - 1; ++l)
            if (std::int64_t(k) * k + std::int64_t(l) * l < bound)
                modes.push_back(ModeIndex::vec0(k, l));
    // The loop above emits vec0 modes sorted by (k, l) already; e001 leads.
    auto shared = std::make_shared<const std::vector<ModeIndex>>(std::move(modes));

    std::scoped_lock lock(cache_mutex);
    if (n >= static_cast<int>(cache.size())) cache.resize(n + 1);
    if (!cache[n]) cache[n] = shared;
    return ModeSet{n, cache[n]};
}

// phi_k(x): 1 for k = 0, sqrt(2) cos(2 k pi x) for k > 0,
// sqrt(2) sin(-2 k pi x) for k < 0.
inline double eval_phi(std::int32_t k, double x) {
    if (k == 0) return 1.0;
    if (k > 0) return std::numbers::sqrt2 * std::cos(kTwoPi * k * x);
    return std::numbers::sqrt2 * std::sin(-kTwoPi * k * x);
}

// Pointwise value of the continuous representative of a basis mode at an
// interior point of the unit square.
inline std::array<double, 2> eval_basis(const ModeIndex& mode, double x, double y) {
    if (mode.variant == Variant::E001) return {0.0, 1.0};
    if (mode.k == 0 && mode.l == 0) return {1.0, 0.0};
    const double norm = std::sqrt(double(mode.k) * mode.k + double(mode.l) * mode.l);
    return {mode.l * eval_phi(mode.k, x) * eval_phi(mode.l, y) / norm,
            mode.k * eval_phi(-mode.k, x) * eval_phi(-mode.l, y) / norm};
}

// Spectral derivative of a basis mode: d_j(mode) = coefficient * target,
// with coefficient 0 (and target = mode) when the derivative vanishes.
// d_1 e(k,l) = -2 pi k e(-k,l) and d_2 e(k,l) = 2 pi l e(k,-l); the target
// keeps the same k^2 + l^2, so derivatives never leave the mode set.
struct ModeDerivative {
    double coefficient = 0.0;
    ModeIndex target;
};

inline ModeDerivative derivative_mode(const ModeIndex& mode, int direction) {
    if (direction != 1 && direction != 2)
        throw std::invalid_argument("derivative_mode: direction must be 1 or 2");
    if (mode.variant == Variant::E001) return {0.0, mode};
    if (direction == 1) {
        if (mode.k == 0) return {0.0, mode};
        return {-kTwoPi * mode.k, ModeIndex::vec0(-mode.k, mode.l)};
    }
    if (mode.l == 0) return {0.0, mode};
    return {kTwoPi * mode.l, ModeIndex::vec0(mode.k, -mode.l)};
}

// Operator-norm bound for the projection remainder:
// (kappa + epsilon + 4 pi^2 n^2)^(-exponent), strictly decreasing in n.
inline double projection_tail_bound(int n, double exponent, const SpectralParams& params) {
    if (n < 1) throw std::invalid_argument("projection_tail_bound: n must satisfy n >= 1");
    if (!(exponent > 0.0))
        throw std::invalid_argument("projection_tail_bound: exponent must satisfy exponent > 0");
    const double base = params.kappa + params.epsilon_shift + kFourPiSq * double(n) * n;
    return std::pow(base, -exponent);
}

} // namespace torusns
