#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jobrec/ingest.hpp"

namespace jobrec::mf {

struct Rating {
    std::size_t user = 0;
    std::size_t job = 0;
    double value = 0.0;  ///< +1 or -1

    friend bool operator==(const Rating&, const Rating&) = default;
};

/// Sparse +/-1 interaction matrix over the users and jobs that have at least
/// one entry. Rows and columns are in id order; entries in (user, job) order.
struct RatingsMatrix {
    std::vector<std::string> users;
    std::vector<std::string> jobs;
    std::vector<Rating> entries;

    std::size_t rows() const { return users.size(); }
    std::size_t cols() const { return jobs.size(); }
};

/// Applies become +1, opened-but-ignored emails -1, clicks are ignored. A
/// +1 wins over a -1 for the same cell.
RatingsMatrix build_matrix(std::span<const DedupedSignal> signals);

struct FactorModel {
    std::vector<std::string> users;
    std::vector<std::string> jobs;
    std::size_t k = 0;
    double lambda = 0.0;
    double mu = 0.0;
    /// Row-major factor tables: users x k, jobs x k, jobs x k.
    std::vector<double> user_factors;
    std::vector<double> user_bias;
    std::vector<double> job_factors;
    std::vector<double> job_bias;
    std::vector<double> implicit_factors;

    std::optional<std::size_t> user_index(std::string_view id) const;
    std::optional<std::size_t> job_index(std::string_view id) const;
    std::span<const double> user_row(std::size_t u) const { return {user_factors.data() + u * k, k}; }
    std::span<const double> job_row(std::size_t j) const { return {job_factors.data() + j * k, k}; }
    std::span<const double> implicit_row(std::size_t j) const {
        return {implicit_factors.data() + j * k, k};
    }

    /// Header `m n k mu lambda`, then one `user_id u_1..u_k b_u` line per user
    /// and one `job_id j_1..j_k b_j y_1..y_k` line per job.
    void write(std::ostream& out) const;
    static FactorModel load(std::istream& in);

    friend bool operator==(const FactorModel&, const FactorModel&) = default;
};

struct TrainOptions {
    std::size_t k = 32;
    double lambda = 0.1;
    int iterations = 10;
    std::uint64_t seed = 7;
    /// Fit implicit factors from each user's implicit item set.
    bool implicit = false;
};

struct TrainReport {
    /// Regularized objective after initialization and after every half-step.
    std::vector<double> loss_trace;
    /// Observed-entry MSE after each full iteration.
    std::vector<double> mse_per_iteration;
};

/// Implicit item sets indexed by model user row; each set holds model job
/// rows. Used only when `options.implicit` is set.
using ImplicitSets = std::vector<std::vector<std::size_t>>;

/// Alternating least squares with user/job biases solved jointly with the
/// factors, the global mean fixed to the observed mean, and ridge penalty
/// lambda on every factor and bias. Throws InputError for an empty matrix,
/// std::invalid_argument for k = 0 or negative lambda, InvariantError on a
/// non-finite intermediate.
FactorModel als_train(const RatingsMatrix& matrix, const TrainOptions& options,
                      TrainReport* report = nullptr, const ImplicitSets* implicit = nullptr);

/// Regularized objective over observed entries.
double objective(const FactorModel& model, const RatingsMatrix& matrix,
                 const ImplicitSets* implicit = nullptr);
double observed_mse(const FactorModel& model, const RatingsMatrix& matrix,
                    const ImplicitSets* implicit = nullptr);

/// mu + b_u + b_j + J_j . U_u. Throws std::out_of_range on a bad index.
double predict_biased(const FactorModel& model, std::size_t u, std::size_t j);

/// mu + b_u + b_j + J_j . (U_u + |N|^-0.5 sum_{i in N} Y_i); reduces exactly to
/// predict_biased for an empty set.
double predict_implicit(const FactorModel& model, std::size_t u, std::size_t j,
                        std::span<const std::size_t> implicit_items);

struct ResolvedItems {
    std::vector<std::size_t> rows;
    std::vector<std::string> unknown;
};

/// Maps job ids to model rows, collecting ids the model has never seen.
ResolvedItems resolve_items(const FactorModel& model, std::span<const std::string> job_ids);

struct ScoredJob {
    std::string job_id;
    double score = 0.0;

    friend bool operator==(const ScoredJob&, const ScoredJob&) = default;
};

/// Top-k jobs by predicted score among model jobs accepted by `eligible`
/// (typically the active ones) and not in `exclusions`; ties by job id.
/// Throws std::out_of_range for a user unknown to the model.
std::vector<ScoredJob> recommend_mf(const FactorModel& model, std::string_view user, std::size_t k,
                                    const std::set<std::string, std::less<>>& exclusions,
                                    const std::set<std::string, std::less<>>* eligible = nullptr,
                                    std::span<const std::size_t> implicit_items = {});

/// Click-based implicit sets for every model user.
ImplicitSets implicit_sets_from_clicks(const FactorModel& model, std::span<const DedupedSignal> signals);
ImplicitSets implicit_sets_from_clicks(const RatingsMatrix& matrix, std::span<const DedupedSignal> signals);

}  // namespace jobrec::mf
