#pragma once

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sepode {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Violation of a documented precondition (dimension mismatch, bad grid, ...).
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Non-finite vector-field evaluation; carries the offending theta_nl so the
/// caller can report or route around the infeasible region.
class FieldEvalError : public std::runtime_error {
public:
    FieldEvalError(const std::string& what, VectorXd theta_nl)
        : std::runtime_error(what), theta_nl_(std::move(theta_nl)) {}
    const VectorXd& theta_nl() const { return theta_nl_; }

private:
    VectorXd theta_nl_;
};

/// B-hat is numerically singular even after the ridge fallback.
class SingularDesignError : public std::runtime_error {
public:
    SingularDesignError(const std::string& what, std::vector<std::string> columns)
        : std::runtime_error(what), columns_(std::move(columns)) {}
    const std::vector<std::string>& columns() const { return columns_; }

private:
    std::vector<std::string> columns_;
};

/// Step-size underflow or step budget exhaustion during ODE integration.
class IntegrationError : public std::runtime_error {
public:
    IntegrationError(const std::string& what, double t_fail)
        : std::runtime_error(what), t_fail_(t_fail) {}
    double t_fail() const { return t_fail_; }

private:
    double t_fail_;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Writes the d x p_l matrix multiplying theta_L into `g`.
using GEval = std::function<void(double t, const VectorXd& x, const VectorXd& theta_nl,
                                 Eigen::Ref<MatrixXd> g)>;
/// Writes the d-vector offset (independent of theta_L) into `h`.
using HEval = std::function<void(double t, const VectorXd& x, const VectorXd& theta_nl,
                                 Eigen::Ref<VectorXd> h)>;

/// Dynamic system x' = g(t, x; theta_NL) * theta_L + h(t, x; theta_NL).
///
/// Systems with no offset term set h == 0; systems without explicit time
/// dependence ignore t. Immutable after construction; g_eval/h_eval must be
/// pure so models can be shared across concurrent workers.
struct SeparableModel {
    std::string name;
    int d = 0;     ///< state dimension
    int p_nl = 0;  ///< nonlinear parameter count
    int p_l = 0;   ///< linear parameter count
    std::vector<std::string> param_names_nl;
    std::vector<std::string> param_names_l;
    std::vector<std::string> state_names;
    double horizon = 0.0;  ///< T
    GEval g_eval;
    HEval h_eval;
    std::vector<Interval> bounds_nl;   ///< box constraints for theta_NL
    std::vector<bool> positivity_l;    ///< per linear parameter: known non-negative
    /// States are clipped below this value before g/h evaluation inside the
    /// criterion (fractional powers of nearly-zero smoothed states). Models
    /// that tolerate any state leave it at -inf.
    double state_floor = -std::numeric_limits<double>::infinity();

    int p() const { return p_nl + p_l; }
};

inline void validate(const SeparableModel& model) {
    if (model.d <= 0 || model.p_nl < 0 || model.p_l < 0)
        throw ContractError("SeparableModel: dimensions must be positive");
    if (static_cast<int>(model.bounds_nl.size()) != model.p_nl)
        throw ContractError("SeparableModel: bounds_nl must have length p_nl");
    if (static_cast<int>(model.positivity_l.size()) != model.p_l)
        throw ContractError("SeparableModel: positivity_l must have length p_l");
    if (!model.g_eval || !model.h_eval)
        throw ContractError("SeparableModel: g_eval and h_eval must be set");
    if (!(model.horizon > 0.0))
        throw ContractError("SeparableModel: horizon must be positive");
}

/// Sample times and the noisy measurements, one row per time.
struct ObservationSet {
    VectorXd times;  ///< strictly increasing, within [0, T]
    MatrixXd Y;      ///< n x d
    std::optional<VectorXd> snr_sigma;  ///< noise sigma per state, when known
};

inline void validate(const ObservationSet& obs) {
    const auto n = obs.times.size();
    if (n < 4) throw ContractError("ObservationSet: need at least 4 observations");
    if (obs.Y.rows() != n)
        throw ContractError("ObservationSet: Y row count must match times");
    for (Eigen::Index i = 1; i < n; ++i)
        if (!(obs.times[i] > obs.times[i - 1]))
            throw ContractError("ObservationSet: times must be strictly increasing");
    if (!obs.Y.allFinite()) throw ContractError("ObservationSet: Y must be finite");
}

/// Parameter vector split into its nonlinear / linear blocks plus the
/// initial state. xi may be left empty where a driver derives it itself.
struct ParamSplit {
    VectorXd theta_nl;
    VectorXd theta_l;
    VectorXd xi;
};

inline void check_dims(const SeparableModel& model, const ParamSplit& params,
                       bool require_xi = true) {
    if (params.theta_nl.size() != model.p_nl)
        throw ContractError("ParamSplit: theta_nl size mismatch for model " + model.name);
    if (params.theta_l.size() != model.p_l)
        throw ContractError("ParamSplit: theta_l size mismatch for model " + model.name);
    if (require_xi && params.xi.size() != model.d)
        throw ContractError("ParamSplit: xi size mismatch for model " + model.name);
}

enum class Method { NLS, SLS };

inline const char* to_string(Method m) { return m == Method::NLS ? "nls" : "sls"; }

struct EstimationResult {
    Method method = Method::SLS;
    ParamSplit estimate;
    double loss = 0.0;       ///< criterion value at the optimum
    int iterations = 0;
    double wall_time = 0.0;  ///< seconds spent in optimization (smoothing excluded)
    bool converged = false;
    double cond_B = 1.0;     ///< condition estimate of B-hat at the optimum
    bool ridge_used = false;
    std::string termination;  ///< optimizer termination reason
};

/// Full vector field g(t, x; theta_NL) * theta_L + h(t, x; theta_NL).
inline VectorXd eval_full_field(const SeparableModel& model, double t, const VectorXd& x,
                                const ParamSplit& params) {
    if (x.size() != model.d)
        throw ContractError("eval_full_field: state size mismatch for model " + model.name);
    check_dims(model, params, /*require_xi=*/false);
    MatrixXd g(model.d, model.p_l);
    VectorXd h(model.d);
    model.g_eval(t, x, params.theta_nl, g);
    model.h_eval(t, x, params.theta_nl, h);
    return g * params.theta_l + h;
}

}  // namespace sepode
