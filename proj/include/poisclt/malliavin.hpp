#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>

#include "poisclt/process.hpp"
#include "poisclt/scores.hpp"

namespace poisclt {

/// A Poisson functional F(chi).
class Functional {
public:
    virtual ~Functional() = default;
    virtual double evaluate(const Configuration& chi) const = 0;
    /// F(chi + p) - F(chi). Default: two full evaluations.
    virtual double add_one(const Configuration& chi, const MarkedPoint& p) const;
};

/// (H - shift) / scale with H the sum of scores over the window.
class ScoreSumFunctional final : public Functional {
public:
    explicit ScoreSumFunctional(ScorePtr score, double shift = 0.0, double scale = 1.0);
    double evaluate(const Configuration& chi) const override;
    /// Incremental when the score has a finite interaction radius.
    double add_one(const Configuration& chi, const MarkedPoint& p) const override;
    /// Cross-check every incremental add_one against full evaluation.
    void set_debug_check(bool on) { debug_check_ = on; }
    const ScoreFamily& score() const { return *score_; }

private:
    ScorePtr score_;
    double shift_;
    double scale_;
    bool debug_check_ = false;
};

/// F(chi) = sum over points in the window of g(p).
class LinearFunctional final : public Functional {
public:
    explicit LinearFunctional(std::function<double(const MarkedPoint&)> g) : g_(std::move(g)) {}
    double evaluate(const Configuration& chi) const override;
    double add_one(const Configuration& chi, const MarkedPoint& p) const override;

private:
    std::function<double(const MarkedPoint&)> g_;
};

double diff1(const Functional& f, const Configuration& chi, const MarkedPoint& p);
/// D_p D_q F, computed as D_a F(chi + b) - D_a F(chi) with a the point of
/// smaller id, hence exactly symmetric in (p, q).
double diff2(const Functional& f, const Configuration& chi, const MarkedPoint& p, const MarkedPoint& q);
/// F(chi+p+q) - F(chi+p) - F(chi+q) + F(chi), evaluated literally.
double diff2_four_term(const Functional& f, const Configuration& chi, const MarkedPoint& p, const MarkedPoint& q);

struct GammaBudgets {
    std::size_t n_outer_x = 100;
    std::size_t n_outer_y = 20;
    std::size_t n_inner = 20;
    std::size_t n_var = 1000;  ///< configurations used for Var F
};

struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
};

struct GammaEstimates {
    std::array<Estimate, 7> gamma{};
    Estimate var_f;
    Estimate mean_f;
    GammaBudgets budgets;
    std::uint64_t seed = 0;
};

/// Outer sampler override: draws a marked point and returns nu-density / proposal-density
/// (already multiplied by the total mass) through `weight`.
using OuterProposal = std::function<MarkedPoint(RandomStream&, std::int64_t id, double& weight)>;

GammaEstimates estimate_gammas(const Functional& f, const DomainPtr& domain, const GammaBudgets& budgets,
                               RandomStream rng, const OuterProposal& proposal = {});

struct PoincareBounds {
    Estimate d_k;
    Estimate d_w;
};

/// Bounds for (F - E F)/sqrt(Var F):
/// d_K <= Var^-1 (g1 + g2/2 + g4 + g5 + g6), d_W <= sqrt(2/pi) Var^-1 g1 + Var^-1 g2/sqrt(2 pi) + Var^-3/2 g3.
PoincareBounds assemble_poincare_bounds(const GammaEstimates& g);

}  // namespace poisclt
