#ifndef OSCEX_COMMON_HPP
#define OSCEX_COMMON_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace oscex {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Bad user input: unknown names, malformed config, out-of-range parameters.
/// The CLI maps this to exit code 2.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A numerical procedure failed its own consistency contract (divergence,
/// residual too large, loss of positivity). The CLI maps this to exit code 3.
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

inline bool is_finite(double x) { return std::isfinite(x); }
inline bool is_finite(const Vec2& v) { return std::isfinite(v[0]) && std::isfinite(v[1]); }

} // namespace oscex

#endif
