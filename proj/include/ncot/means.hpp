#ifndef NCOT_MEANS_HPP
#define NCOT_MEANS_HPP

// Scalar symmetric means theta(s, t) on [0, inf)^2.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "ncot/errors.hpp"

namespace ncot {

enum class MeanKind { Arithmetic, Logarithmic, Geometric, Harmonic };

inline std::string_view to_string(MeanKind k)
{
    switch (k) {
    case MeanKind::Arithmetic: return "am";
    case MeanKind::Logarithmic: return "lm";
    case MeanKind::Geometric: return "gm";
    case MeanKind::Harmonic: return "hm";
    }
    return "?";
}

inline std::optional<MeanKind> parse_mean(std::string_view s)
{
    if (s == "am") return MeanKind::Arithmetic;
    if (s == "lm") return MeanKind::Logarithmic;
    if (s == "gm") return MeanKind::Geometric;
    if (s == "hm") return MeanKind::Harmonic;
    return std::nullopt;
}

namespace detail {

// u / log(1 + u) and its derivative, for |u| small.
inline double log_ratio_series(double u)
{
    return 1.0 + u * (0.5 + u * (-1.0 / 12.0 + u * (1.0 / 24.0 + u * (-19.0 / 720.0 + u * 3.0 / 160.0))));
}

inline double log_ratio_series_derivative(double u)
{
    return 0.5 + u * (-1.0 / 6.0 + u * (1.0 / 8.0 + u * (-19.0 / 180.0 + u * 3.0 / 32.0)));
}

// g(x) = (x - 1)/log x, g(1) = 1
inline double log_generator(double x)
{
    const double u = x - 1.0;
    if (std::abs(u) < 1e-3)
        return log_ratio_series(u);
    return u / std::log(x);
}

inline double log_generator_derivative(double x)
{
    const double u = x - 1.0;
    if (std::abs(u) < 1e-3)
        return log_ratio_series_derivative(u);
    const double l = std::log(x);
    return (l - u / x) / (l * l);
}

} // namespace detail

/// theta(s, t), extended continuously to the boundary of the quadrant.
inline double mean_value(MeanKind kind, double s, double t)
{
    if (!(s >= 0.0) || !(t >= 0.0))
        throw DomainError("means are defined on [0, inf)^2");
    switch (kind) {
    case MeanKind::Arithmetic:
        return 0.5 * (s + t);
    case MeanKind::Geometric:
        return std::sqrt(s * t);
    case MeanKind::Harmonic:
        return (s + t) > 0.0 ? 2.0 * s * t / (s + t) : 0.0;
    case MeanKind::Logarithmic:
        if (s == 0.0 || t == 0.0)
            return 0.0;
        if (s == t)
            return s;
        return s >= t ? s * detail::log_generator(t / s) : t * detail::log_generator(s / t);
    }
    return 0.0;
}

/// Partial derivative of theta in its first argument (s, t > 0).
inline double mean_partial_first(MeanKind kind, double s, double t)
{
    switch (kind) {
    case MeanKind::Arithmetic:
        return 0.5;
    case MeanKind::Geometric:
        return 0.5 * std::sqrt(t / s);
    case MeanKind::Harmonic: {
        const double q = s + t;
        return 2.0 * t * t / (q * q);
    }
    case MeanKind::Logarithmic: {
        // theta = s g(t/s)  =>  d_s theta = g(x) - x g'(x)
        const double x = t / s;
        return detail::log_generator(x) - x * detail::log_generator_derivative(x);
    }
    }
    return 0.0;
}

/// The operator monotone f with theta(s, t) = s f(t / s).
inline double mean_generating_function(MeanKind kind, double x)
{
    switch (kind) {
    case MeanKind::Arithmetic: return 0.5 * (1.0 + x);
    case MeanKind::Logarithmic: return x == 0.0 ? 0.0 : detail::log_generator(x);
    case MeanKind::Geometric: return std::sqrt(x);
    case MeanKind::Harmonic: return 2.0 * x / (1.0 + x);
    }
    return 0.0;
}

/// (f(s) - f(t)) / (s - t), or f'((s + t)/2) when |s - t| < 1e-8 max(1, |s|, |t|).
template <class F, class DF>
double divided_difference(F&& f, DF&& df, double s, double t)
{
    const double scale = std::max({1.0, std::abs(s), std::abs(t)});
    if (std::abs(s - t) < 1e-8 * scale)
        return df(0.5 * (s + t));
    return (f(s) - f(t)) / (s - t);
}

} // namespace ncot

#endif // NCOT_MEANS_HPP
