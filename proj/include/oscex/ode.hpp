#ifndef OSCEX_ODE_HPP
#define OSCEX_ODE_HPP

#include "oscex/common.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace oscex {

/// Adaptive embedded Runge-Kutta 5(4), Dormand-Prince coefficients, FSAL.
/// State is a fixed-size Eigen vector. Step size control is the classic
/// 0.9*(tol/err)^(1/5) rule clamped to [0.2, 5].
template <int N>
class Rk45 {
public:
    using State = Eigen::Matrix<double, N, 1>;
    using Rhs = std::function<void(double, const State&, State&)>;

    Rk45(Rhs rhs, double rtol = 1e-10, double atol = 1e-10)
        : rhs_(std::move(rhs)), rtol_(rtol), atol_(atol) {}

    /// Integrate from (t0, y0) to t1 exactly. Returns the final state.
    State integrate(double t0, const State& y0, double t1) {
        double t = t0;
        State y = y0;
        State k1;
        rhs_(t, y, k1);
        double h = initial_step(t, y, k1, t1 - t0);
        const double dir = (t1 >= t0) ? 1.0 : -1.0;
        h = dir * std::abs(h);
        int rejects_in_a_row = 0;
        while (dir * (t1 - t) > 0) {
            if (dir * (t + h - t1) > 0) h = t1 - t;
            State y_new, k_new;
            double err = step(t, y, k1, h, y_new, k_new);
            if (err <= 1.0) {
                t += h;
                y = y_new;
                k1 = k_new;
                rejects_in_a_row = 0;
            } else if (++rejects_in_a_row > 60) {
                throw numerical_error("rk45: step size collapsed (stiffness or NaN)");
            }
            h *= factor(err);
            if (std::abs(h) < 1e-15 * (std::abs(t) + 1.0))
                throw numerical_error("rk45: step underflow");
        }
        return y;
    }

    /// Integrate until event(t, y) crosses from negative to >= 0, or until
    /// t_max. The crossing is located to `t_tol` by bisection on re-stepping.
    /// Returns true if the event fired; (t, y) hold the crossing state.
    bool integrate_until(double t0, const State& y0,
                         const std::function<double(double, const State&)>& event,
                         double t_max, double& t, State& y,
                         double t_tol = 1e-12) {
        t = t0;
        y = y0;
        State k1;
        rhs_(t, y, k1);
        double g_prev = event(t, y);
        double h = initial_step(t, y, k1, t_max - t0);
        const double dir = (t_max >= t0) ? 1.0 : -1.0;
        h = dir * std::abs(h);
        int rejects_in_a_row = 0;
        while (dir * (t_max - t) > 0) {
            if (dir * (t + h - t_max) > 0) h = t_max - t;
            State y_new, k_new;
            double err = step(t, y, k1, h, y_new, k_new);
            if (err > 1.0) {
                if (++rejects_in_a_row > 60)
                    throw numerical_error("rk45: step size collapsed (stiffness or NaN)");
                h *= factor(err);
                continue;
            }
            rejects_in_a_row = 0;
            double g_new = event(t + h, y_new);
            if (g_prev < 0.0 && g_new >= 0.0) {
                // bisect the step until the crossing is bracketed within t_tol
                double ta = t, tb = t + h;
                State ya = y;
                while (std::abs(tb - ta) > t_tol * (1.0 + std::abs(ta))) {
                    double tm = 0.5 * (ta + tb);
                    State ym = integrate(ta, ya, tm);
                    if (event(tm, ym) >= 0.0) {
                        tb = tm;
                    } else {
                        ta = tm;
                        ya = ym;
                    }
                }
                t = tb;
                y = integrate(ta, ya, tb);
                return true;
            }
            t += h;
            y = y_new;
            k1 = k_new;
            g_prev = g_new;
            h *= factor(err);
        }
        return false;
    }

private:
    double step(double t, const State& y, const State& k1, double h,
                State& y_new, State& k_new) {
        State k2, k3, k4, k5, k6;
        State tmp = y + h * (a21 * k1);
        rhs_(t + c2 * h, tmp, k2);
        tmp = y + h * (a31 * k1 + a32 * k2);
        rhs_(t + c3 * h, tmp, k3);
        tmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
        rhs_(t + c4 * h, tmp, k4);
        tmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        rhs_(t + c5 * h, tmp, k5);
        tmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        rhs_(t + h, tmp, k6);
        y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        rhs_(t + h, y_new, k_new);   // FSAL stage
        State y4 = y + h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k_new);
        double err = 0;
        for (int i = 0; i < N; ++i) {
            double sk = atol_ + rtol_ * std::max(std::abs(y[i]), std::abs(y_new[i]));
            double e = (y_new[i] - y4[i]) / sk;
            err += e * e;
        }
        err = std::sqrt(err / N);
        if (!std::isfinite(err)) err = 1e10;
        return err;
    }

    static double factor(double err) {
        double f = 0.9 * std::pow(std::max(err, 1e-30), -0.2);
        return std::clamp(f, 0.2, 5.0);
    }

    double initial_step(double t, const State& y, const State& k1, double span) {
        double d0 = y.norm(), d1n = k1.norm();
        double h = (d1n > 1e-12) ? 0.01 * std::max(d0, 1.0) / d1n : 1e-6;
        return std::min(h, std::abs(span));
    }

    Rhs rhs_;
    double rtol_, atol_;

    // Dormand-Prince tableau
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                            a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                            a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double d1 = 5179.0 / 57600, d3 = 7571.0 / 16695, d4 = 393.0 / 640,
                            d5 = -92097.0 / 339200, d6 = 187.0 / 2100, d7 = 1.0 / 40;
};

} // namespace oscex

#endif
