#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "poisclt/process.hpp"
#include "poisclt/scores.hpp"

namespace poisclt {

struct Seed {
    Point loc;
    double time = 0.0;
    double speed = 1.0;
    std::int64_t id = 0;
};

struct BirthGrowthConfig {
    double rho_min = 0.1;
    double tail_rate = 1.0;  ///< C
    double t0 = std::numeric_limits<double>::infinity();
    double bias_eps = 1e-3;

    /// Validates the parameters and checks the speed law's tail on 10^5 draws.
    static BirthGrowthConfig make(double rho_min, double tail_rate, double t0 = std::numeric_limits<double>::infinity(),
                                  double bias_eps = 1e-3);
    MarkLaw speed_law() const { return MarkLaw::shifted_exponential(rho_min, tail_rate); }
};

/// Empirical check that P(R >= r) <= exp(C rho_min) exp(-C r) within sampling error.
bool check_speed_tail(const MarkLaw& law, double rho_min, double rate, std::size_t draws, RandomStream rng);

struct AcceptanceResult {
    std::vector<char> accepted;  ///< aligned with the input order
    std::size_t count = 0;
    std::size_t ties_perturbed = 0;
};

/// Chronological sweep: seed j is accepted iff t_j <= t0 and its location is
/// outside every ball B(z_i, (t_j - t_i) R_i) of an earlier accepted seed i.
AcceptanceResult simulate_acceptance(const Space& space, std::span<const Seed> seeds,
                                     double t0 = std::numeric_limits<double>::infinity());

/// Birth times after tie-breaking: seeds are ordered by (time, id) and equal
/// times are pushed apart by 1e-12 steps.
std::vector<double> effective_times(std::span<const Seed> seeds, std::size_t* ties = nullptr);

/// Re-checks accepted/rejected flags against the definition (O(n * accepted)).
bool verify_acceptance(const Space& space, std::span<const Seed> seeds, std::span<const char> accepted, double t0);

std::vector<Seed> seeds_from(const Configuration& chi);

/// Acceptance indicator as a score: xi(p, chi) = 1 iff p is accepted in chi + p.
class BirthGrowthScore final : public ScoreFamily {
public:
    explicit BirthGrowthScore(BirthGrowthConfig cfg) : cfg_(cfg) {}
    std::string name() const override { return "birthgrowth"; }
    std::vector<double> evaluate_many(const Configuration& chi, std::span<const std::size_t> positions) const override;
    std::optional<double> moment_hint() const override { return 1.0; }
    std::optional<double> bound() const override { return 1.0; }
    const BirthGrowthConfig& config() const { return cfg_; }

private:
    BirthGrowthConfig cfg_;
};

/// Time of first coverage of location z by the accepted seeds of `seeds`
/// (infinity when never covered). A seed born at z at time s < this time is accepted.
double coverage_time(const Space& space, std::span<const Seed> seeds, const AcceptanceResult& acc, const Point& z);

/// T_max = max(4, log(nu(W)/eps)/rate); rate <= 0 raises ConfigError.
double pick_time_truncation(double nu_w, double eps, double rate);

}  // namespace poisclt
