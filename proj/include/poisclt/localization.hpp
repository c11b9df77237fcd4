#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "poisclt/process.hpp"
#include "poisclt/scores.hpp"
#include "poisclt/stats.hpp"

namespace poisclt {

struct ProfilePoint {
    double r = 0.0;         ///< radius (space) or time (time profile)
    double estimate = 0.0;  ///< max over the panel of the mismatch frequency
    double lo = 0.0;        ///< Wilson interval of the maximizing panel cell
    double hi = 0.0;
    std::size_t hits = 0;
    std::size_t trials = 0;
};

/// Adversarial sets A added next to the evaluated point (|A| = 6 unless empty).
enum class Placement { Empty, Clustered, WindowBoundary, Straddling };
std::string to_string(Placement p);

struct PanelOptions {
    std::vector<Placement> placements = {Placement::Empty, Placement::Clustered, Placement::WindowBoundary,
                                         Placement::Straddling};
    /// Base points; empty means centre, window boundary and corner.
    std::vector<Point> base_points;
    /// Time profile: also evaluate at t = s/2 in addition to t = s.
    bool midpoint_time = true;
    /// Distance of clustered A points from the base point in the time profile.
    double spatial_scale = 1.0;
};

/// psi-hat(r): frequency of xi != xi^[r], maximized over the panel, common random numbers across r.
std::vector<ProfilePoint> estimate_psi(const ScoreFamily& family, const DomainPtr& domain,
                                       std::span<const double> radii, std::size_t n_trials,
                                       const PanelOptions& panel, RandomStream rng);
/// phi-hat(s): frequency of xi != xi^(s) over the panel.
std::vector<ProfilePoint> estimate_phi(const ScoreFamily& family, const DomainPtr& domain,
                                       std::span<const double> times, std::size_t n_trials,
                                       const PanelOptions& panel, RandomStream rng);

struct MomentEstimate {
    double value = 1.0;
    bool heavy_tail = false;
};

/// max(1, max over panel and r in radii + {inf} of E|xi^[r]|^5).
/// On space-time domains the time-restricted scores at `times` join the maximum.
MomentEstimate estimate_M5(const ScoreFamily& family, const DomainPtr& domain, std::span<const double> radii,
                           std::size_t n_trials, const PanelOptions& panel, RandomStream rng,
                           std::span<const double> times = {});

/// log psi-tilde = intercept + slope * g(r) over the positive estimates; Step when the
/// profile hits exact zero.
struct DecayModel {
    enum class Kind { Linear, DimPower, ExpExp, Log, Step };
    Kind kind = Kind::Step;
    double intercept = 0.0;
    double slope = 0.0;
    double a = 0.0;       ///< ExpExp rate
    int dim = 1;
    double level = 1.0;   ///< Step: value below the cutoff
    double cutoff = 0.0;  ///< Step: first radius with an all-zero tail
    double aic = 0.0;
    double max_fitted_r = 0.0;
    LinearFit fit;

    double abscissa(double r) const;
    /// log psi-tilde(r); -inf beyond a Step cutoff.
    double log_value(double r) const;
    bool extrapolated(double r) const { return r > max_fitted_r; }
    std::string describe() const;
};
std::string to_string(DecayModel::Kind k);

/// Selects the model by AIC among r, r^d, e^{ar} (a in {1/4, 1/2, 1}), log r; a step when
/// every estimate from some radius on is zero.
DecayModel fit_decay(std::span<const ProfilePoint> pts, int dim);

/// A localization profile psi : [0, inf) -> [0, 2] handled in log space.
class Profile {
public:
    using LogFn = std::function<double(double)>;
    /// psi(r) = min(2, exp(log_fn(r))), psi(0) = 2.
    static Profile from_log(LogFn log_fn, std::vector<double> breakpoints = {}, std::string name = "custom");
    /// psi(r) = level for r < cutoff, 0 beyond (psi(0) = 2).
    static Profile step(double level, double cutoff);
    /// min(2, 8 psi-tilde(r)) for a fitted model.
    static Profile from_model(const DecayModel& m);

    double log_value(double r) const;
    double value(double r) const;
    const std::vector<double>& breakpoints() const { return breaks_; }
    const std::string& name() const { return name_; }

private:
    LogFn log_fn_;
    std::vector<double> breaks_;
    std::string name_;
};

struct IntegralResult {
    double value = 1.0;
    bool finite = true;
    std::string note;
};

/// max(1, sup_x int psi(d(x,z)/2)^theta nu(dz)) using the homogeneous full-space polar element.
IntegralResult integral_I_psi(const Profile& psi, const Space& space, double theta);
/// max(1, int phi(t)^theta' mu(dt)).
IntegralResult integral_I_phi(const Profile& phi, const TimeMeasure& mu, double theta_prime);

enum class Carrier { Domain, FullSpace };
/// G_q = 2^q nu(W) + int_{X \ W} psi(d(x, W))^q nu(dx).
IntegralResult integral_G_q(const Profile& psi, const Space& space, const Window& window, Carrier carrier, double q,
                            const Window& domain_carrier = Window::whole());

struct HypConditionResult {
    bool holds = false;
    double liminf_ratio = 0.0;
};
/// liminf_{r->inf} theta tau(r) / ((d-1) r) > 1, evaluated on r = 2^k.
HypConditionResult hyperbolic_condition(const std::function<double(double)>& tau, int dim, double theta);

enum class BoundForm { SpaceTime, SpaceOnly, XEqualsW };

struct Exponents {
    double theta_k = 1.0 / 240, theta_prime_k = 1.0 / 120, q_k = 1.0 / 120;
    double theta_w = 1.0 / 50, theta_prime_w = 3.0 / 200, q_w = 3.0 / 200;
    static Exponents defaults(bool bounded_score);
};

struct BoundInputs {
    double c = 1.0;
    std::map<double, double> I_psi;  ///< theta -> value
    std::map<double, double> I_phi;  ///< theta' -> value
    std::map<double, double> G;      ///< q -> value
    std::optional<double> M5;
    std::optional<double> var_h;
    std::optional<double> nu_w;      ///< needed for XEqualsW
    bool time_dependent = false;     ///< XEqualsW: include I_phi factors
};

struct BoundReport {
    double d_k = 0.0;
    double d_w = 0.0;
    double C_K = 0.0;
    double C_W = 0.0;
    std::map<std::string, double> factors;
    Exponents exponents;
    bool modulo_universal_constant = true;
};

BoundReport assemble_theorem_bound(const BoundInputs& in, BoundForm form, bool bounded_score = false);

/// Bounded case: 2 q L^q alpha; unbounded: (36q+16) max(1, M^{q/(q+1)}) alpha^{1/(q+1)}.
double mixed_moment_gap_bound(int q, double L_or_M, double alpha, bool bounded);

/// Base panel points used by default: centre, a window-boundary point and a corner.
std::vector<Point> default_base_points(const SpaceTimeDomain& domain);
/// Point at distance s from z in direction u (hyperbolic: along the geodesic).
Point point_at_distance(const Space& space, const Point& z, double s, std::span<const double> u);

}  // namespace poisclt
