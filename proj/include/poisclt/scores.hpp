#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "poisclt/process.hpp"
#include "poisclt/spatial_index.hpp"

namespace poisclt {

/// A score xi together with its short-range families xi^[r] (space) and
/// xi^(s) (time). The evaluated point always counts as part of the input;
/// if it is also present in chi (same id) it is not counted twice.
class ScoreFamily {
public:
    virtual ~ScoreFamily() = default;

    virtual std::string name() const = 0;

    /// Scores of chi[pos] within chi, for each pos in `positions`.
    virtual std::vector<double> evaluate_many(const Configuration& chi,
                                              std::span<const std::size_t> positions) const = 0;

    double evaluate(const MarkedPoint& p, const Configuration& chi) const;
    /// Default: xi(p, chi restricted to the open ball B_r(p.loc)).
    virtual double evaluate_space_restricted(const MarkedPoint& p, const Configuration& chi, double r) const;
    /// Default: 1{p.time < s} xi(p, chi restricted to times < s).
    virtual double evaluate_time_restricted(const MarkedPoint& p, const Configuration& chi, double s) const;

    /// A priori bound on E|xi|^5, used when M5 cannot be estimated.
    virtual std::optional<double> moment_hint() const { return std::nullopt; }
    /// Certified bound on |xi| when one exists.
    virtual std::optional<double> bound() const { return std::nullopt; }
    /// Adding a point p changes xi only at points within this distance of p
    /// (infinity when no such radius is known).
    virtual double interaction_radius() const { return std::numeric_limits<double>::infinity(); }
};

using ScorePtr = std::shared_ptr<const ScoreFamily>;

/// chi with p added unless its id is already present; `pos` receives p's position.
Configuration with_point(const Configuration& chi, const MarkedPoint& p, std::size_t& pos);

/// Positions of points of chi whose location lies in the domain window.
std::vector<std::size_t> window_positions(const Configuration& chi);

/// H(chi) = sum over points in W of xi(p, chi), pairwise-summed in id order.
double score_sum(const ScoreFamily& score, const Configuration& chi);

/// Kernel f_delta of a local U-statistic of order k. Vanishes unless all
/// pairwise distances are < delta.
struct UStatKernel {
    enum class Kind { Indicator, PowerLength, Custom };
    int order = 2;
    double delta = 1.0;
    Kind kind = Kind::Indicator;
    double weight = 0.5;  ///< multiplies the kernel value
    double alpha = 1.0;   ///< PowerLength: (sum of pairwise distances)^alpha
    /// Custom: receives the k points (evaluated point first); the delta cutoff is applied outside.
    std::function<double(std::span<const MarkedPoint* const>, const Space&)> custom;

    double sup_norm_hint() const;
};

class UStatScore final : public ScoreFamily {
public:
    explicit UStatScore(UStatKernel kernel);
    std::string name() const override { return "ustat"; }
    std::vector<double> evaluate_many(const Configuration& chi, std::span<const std::size_t> positions) const override;
    double evaluate_space_restricted(const MarkedPoint& p, const Configuration& chi, double r) const override;
    std::optional<double> bound() const override;
    double interaction_radius() const override { return kernel_.delta; }
    const UStatKernel& kernel() const { return kernel_; }

    double kernel_value(std::span<const MarkedPoint* const> pts, const Space& space) const;

private:
    UStatKernel kernel_;
};

class IsolatedScore final : public ScoreFamily {
public:
    explicit IsolatedScore(double rho);
    std::string name() const override { return "isolated"; }
    std::vector<double> evaluate_many(const Configuration& chi, std::span<const std::size_t> positions) const override;
    std::optional<double> moment_hint() const override { return 1.0; }
    std::optional<double> bound() const override { return 1.0; }
    double interaction_radius() const override { return rho_; }
    double rho() const { return rho_; }

private:
    double rho_;
};

struct KnnScoreConfig {
    int k = 1;
    double alpha = 1.0;
};

class KnnScore final : public ScoreFamily {
public:
    explicit KnnScore(KnnScoreConfig cfg);
    std::string name() const override { return "knn"; }
    std::vector<double> evaluate_many(const Configuration& chi, std::span<const std::size_t> positions) const override;
    const KnnScoreConfig& config() const { return cfg_; }

private:
    KnnScoreConfig cfg_;
};

/// Constant score, useful for counting functionals.
class ConstantScore final : public ScoreFamily {
public:
    explicit ConstantScore(double value) : value_(value) {}
    std::string name() const override { return "constant"; }
    std::vector<double> evaluate_many(const Configuration&, std::span<const std::size_t> positions) const override {
        return std::vector<double>(positions.size(), value_);
    }
    std::optional<double> moment_hint() const override { return std::pow(std::abs(value_), 5.0); }
    std::optional<double> bound() const override { return std::abs(value_); }
    double interaction_radius() const override { return 0.0; }

private:
    double value_;
};

/// Wraps any score so that xi^[r] and xi^(s) are plain restriction of input,
/// discarding family-specific short-range variants.
ScorePtr canonical_restrictions(ScorePtr score);

}  // namespace poisclt
