#include "jobrec/mf.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "jobrec/csv.hpp"

namespace jobrec::mf {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t x = 0; x < a.size(); ++x) {
        s += a[x] * b[x];
    }
    return s;
}

std::optional<std::size_t> index_of(const std::vector<std::string>& ids, std::string_view id) {
    const auto it = std::lower_bound(ids.begin(), ids.end(), id);
    if (it == ids.end() || *it != id) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - ids.begin());
}

Eigen::VectorXd solve_ridge(Eigen::MatrixXd gram, const Eigen::VectorXd& rhs, double lambda) {
    gram.diagonal().array() += lambda;
    if (lambda > 0.0) {
        return gram.ldlt().solve(rhs);
    }
    return gram.completeOrthogonalDecomposition().solve(rhs);
}

/// Per-user effective implicit offset |N(u)|^-0.5 * sum Y.
std::vector<double> implicit_offsets(const FactorModel& m, const ImplicitSets* implicit) {
    std::vector<double> z(m.users.size() * m.k, 0.0);
    if (!implicit) {
        return z;
    }
    for (std::size_t u = 0; u < m.users.size() && u < implicit->size(); ++u) {
        const auto& items = (*implicit)[u];
        if (items.empty()) {
            continue;
        }
        const double s = 1.0 / std::sqrt(static_cast<double>(items.size()));
        for (std::size_t i : items) {
            const auto y = m.implicit_row(i);
            for (std::size_t f = 0; f < m.k; ++f) {
                z[u * m.k + f] += s * y[f];
            }
        }
    }
    return z;
}

double residual(const FactorModel& m, const Rating& r, const std::vector<double>& z) {
    double pred = m.mu + m.user_bias[r.user] + m.job_bias[r.job];
    const auto jr = m.job_row(r.job);
    const auto ur = m.user_row(r.user);
    for (std::size_t f = 0; f < m.k; ++f) {
        pred += jr[f] * (ur[f] + z[r.user * m.k + f]);
    }
    return r.value - pred;
}

void check_finite(const std::vector<double>& values, std::string_view what) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw InvariantError(fmt::format("non-finite value in {} during ALS", what));
        }
    }
}

}  // namespace

RatingsMatrix build_matrix(std::span<const DedupedSignal> signals) {
    std::map<std::pair<std::string_view, std::string_view>, double> cells;
    for (const auto& sig : signals) {
        double value = 0.0;
        if (sig.kind == SignalKind::Apply) {
            value = 1.0;
        } else if (sig.kind == SignalKind::EmailOpenNoClick) {
            value = -1.0;
        } else {
            continue;
        }
        auto [it, inserted] = cells.try_emplace({sig.user_id, sig.job_id}, value);
        if (!inserted) {
            it->second = std::max(it->second, value);
        }
    }
    RatingsMatrix m;
    for (const auto& [key, value] : cells) {
        m.users.emplace_back(key.first);
        m.jobs.emplace_back(key.second);
    }
    std::sort(m.users.begin(), m.users.end());
    m.users.erase(std::unique(m.users.begin(), m.users.end()), m.users.end());
    std::sort(m.jobs.begin(), m.jobs.end());
    m.jobs.erase(std::unique(m.jobs.begin(), m.jobs.end()), m.jobs.end());
    for (const auto& [key, value] : cells) {
        m.entries.push_back({*index_of(m.users, key.first), *index_of(m.jobs, key.second), value});
    }
    return m;
}

std::optional<std::size_t> FactorModel::user_index(std::string_view id) const {
    return index_of(users, id);
}

std::optional<std::size_t> FactorModel::job_index(std::string_view id) const {
    return index_of(jobs, id);
}

void FactorModel::write(std::ostream& out) const {
    out << users.size() << ' ' << jobs.size() << ' ' << k << ' ' << csv::format_double(mu) << ' '
        << csv::format_double(lambda) << '\n';
    for (std::size_t u = 0; u < users.size(); ++u) {
        out << users[u];
        for (double v : user_row(u)) {
            out << ' ' << csv::format_double(v);
        }
        out << ' ' << csv::format_double(user_bias[u]) << '\n';
    }
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        out << jobs[j];
        for (double v : job_row(j)) {
            out << ' ' << csv::format_double(v);
        }
        out << ' ' << csv::format_double(job_bias[j]);
        for (double v : implicit_row(j)) {
            out << ' ' << csv::format_double(v);
        }
        out << '\n';
    }
}

FactorModel FactorModel::load(std::istream& in) {
    FactorModel m;
    std::string line;
    if (!std::getline(in, line)) {
        throw InputError("model: missing header");
    }
    std::size_t rows = 0, cols = 0;
    {
        std::istringstream header(line);
        std::string mu, lambda;
        if (!(header >> rows >> cols >> m.k >> mu >> lambda) || m.k == 0) {
            throw InputError("model: malformed header");
        }
        const auto mu_v = csv::parse_double(mu);
        const auto lambda_v = csv::parse_double(lambda);
        if (!mu_v || !lambda_v) {
            throw InputError("model: malformed header");
        }
        m.mu = *mu_v;
        m.lambda = *lambda_v;
    }
    auto read_row = [&](std::size_t expected, std::string& id, std::vector<double>& values) {
        if (!std::getline(in, line)) {
            throw InputError("model: truncated");
        }
        std::istringstream fields(line);
        fields >> id;
        std::string token;
        values.clear();
        while (fields >> token) {
            const auto v = csv::parse_double(token);
            if (!v) {
                throw InputError(fmt::format("model: invalid number '{}'", token));
            }
            values.push_back(*v);
        }
        if (values.size() != expected) {
            throw InputError(fmt::format("model: row for '{}' has {} values, expected {}", id,
                                         values.size(), expected));
        }
    };
    std::string id;
    std::vector<double> values;
    for (std::size_t u = 0; u < rows; ++u) {
        read_row(m.k + 1, id, values);
        m.users.push_back(id);
        m.user_factors.insert(m.user_factors.end(), values.begin(), values.begin() + static_cast<std::ptrdiff_t>(m.k));
        m.user_bias.push_back(values.back());
    }
    for (std::size_t j = 0; j < cols; ++j) {
        read_row(2 * m.k + 1, id, values);
        m.jobs.push_back(id);
        const auto k = static_cast<std::ptrdiff_t>(m.k);
        m.job_factors.insert(m.job_factors.end(), values.begin(), values.begin() + k);
        m.job_bias.push_back(values[m.k]);
        m.implicit_factors.insert(m.implicit_factors.end(), values.begin() + k + 1, values.end());
    }
    if (!std::is_sorted(m.users.begin(), m.users.end()) || !std::is_sorted(m.jobs.begin(), m.jobs.end())) {
        throw InputError("model: ids must be sorted");
    }
    return m;
}

double objective(const FactorModel& model, const RatingsMatrix& matrix, const ImplicitSets* implicit) {
    const auto z = implicit_offsets(model, implicit);
    double loss = 0.0;
    for (const auto& r : matrix.entries) {
        const double e = residual(model, r, z);
        loss += e * e;
    }
    double reg = 0.0;
    for (const auto* table : {&model.user_factors, &model.user_bias, &model.job_factors,
                              &model.job_bias, &model.implicit_factors}) {
        for (double v : *table) {
            reg += v * v;
        }
    }
    return loss + model.lambda * reg;
}

double observed_mse(const FactorModel& model, const RatingsMatrix& matrix, const ImplicitSets* implicit) {
    if (matrix.entries.empty()) {
        return 0.0;
    }
    const auto z = implicit_offsets(model, implicit);
    double loss = 0.0;
    for (const auto& r : matrix.entries) {
        const double e = residual(model, r, z);
        loss += e * e;
    }
    return loss / static_cast<double>(matrix.entries.size());
}

FactorModel als_train(const RatingsMatrix& matrix, const TrainOptions& options, TrainReport* report,
                      const ImplicitSets* implicit) {
    if (matrix.entries.empty()) {
        throw InputError("ratings matrix has no entries");
    }
    if (options.k == 0) {
        throw std::invalid_argument("latent dimension k must be at least 1");
    }
    if (!(options.lambda >= 0.0)) {
        throw std::invalid_argument("lambda must be non-negative");
    }
    const ImplicitSets* sets = options.implicit ? implicit : nullptr;
    if (sets && sets->size() != matrix.rows()) {
        throw std::invalid_argument("implicit sets must have one entry per matrix row");
    }

    const std::size_t m = matrix.rows();
    const std::size_t n = matrix.cols();
    const std::size_t k = options.k;
    FactorModel model;
    model.users = matrix.users;
    model.jobs = matrix.jobs;
    model.k = k;
    model.lambda = options.lambda;
    double sum = 0.0;
    for (const auto& r : matrix.entries) {
        sum += r.value;
    }
    model.mu = sum / static_cast<double>(matrix.entries.size());

    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> init(-0.01, 0.01);
    model.user_factors.resize(m * k);
    model.job_factors.resize(n * k);
    for (double& v : model.user_factors) {
        v = init(rng);
    }
    for (double& v : model.job_factors) {
        v = init(rng);
    }
    model.implicit_factors.assign(n * k, 0.0);
    if (sets) {
        for (double& v : model.implicit_factors) {
            v = init(rng);
        }
    }
    model.user_bias.assign(m, 0.0);
    model.job_bias.assign(n, 0.0);

    std::vector<std::vector<std::size_t>> by_user(m), by_job(n);
    for (std::size_t e = 0; e < matrix.entries.size(); ++e) {
        by_user[matrix.entries[e].user].push_back(e);
        by_job[matrix.entries[e].job].push_back(e);
    }
    // Users whose implicit set contains each job, for the implicit half-step.
    std::vector<std::vector<std::size_t>> holders(n);
    if (sets) {
        for (std::size_t u = 0; u < m; ++u) {
            for (std::size_t i : (*sets)[u]) {
                if (i >= n) {
                    throw std::invalid_argument("implicit item outside the matrix");
                }
                holders[i].push_back(u);
            }
        }
    }

    auto record = [&] {
        if (report) {
            report->loss_trace.push_back(objective(model, matrix, sets));
        }
    };
    record();

    const auto dim = static_cast<Eigen::Index>(k + 1);
    for (int it = 0; it < options.iterations; ++it) {
        // Users: [U_u, b_u] with J, b_j, Y fixed.
        auto z = implicit_offsets(model, sets);
        for (std::size_t u = 0; u < m; ++u) {
            Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(dim, dim);
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
            Eigen::VectorXd a(dim);
            for (std::size_t e : by_user[u]) {
                const auto& r = matrix.entries[e];
                const auto jr = model.job_row(r.job);
                double offset = 0.0;
                for (std::size_t f = 0; f < k; ++f) {
                    a[static_cast<Eigen::Index>(f)] = jr[f];
                    offset += jr[f] * z[u * k + f];
                }
                a[static_cast<Eigen::Index>(k)] = 1.0;
                const double target = r.value - model.mu - model.job_bias[r.job] - offset;
                gram.noalias() += a * a.transpose();
                rhs.noalias() += target * a;
            }
            const Eigen::VectorXd x = solve_ridge(std::move(gram), rhs, options.lambda);
            for (std::size_t f = 0; f < k; ++f) {
                model.user_factors[u * k + f] = x[static_cast<Eigen::Index>(f)];
            }
            model.user_bias[u] = x[static_cast<Eigen::Index>(k)];
        }
        check_finite(model.user_factors, "user factors");
        check_finite(model.user_bias, "user biases");
        record();

        // Jobs: [J_j, b_j] with U, b_u, Y fixed.
        for (std::size_t j = 0; j < n; ++j) {
            Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(dim, dim);
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
            Eigen::VectorXd a(dim);
            for (std::size_t e : by_job[j]) {
                const auto& r = matrix.entries[e];
                const auto ur = model.user_row(r.user);
                for (std::size_t f = 0; f < k; ++f) {
                    a[static_cast<Eigen::Index>(f)] = ur[f] + z[r.user * k + f];
                }
                a[static_cast<Eigen::Index>(k)] = 1.0;
                const double target = r.value - model.mu - model.user_bias[r.user];
                gram.noalias() += a * a.transpose();
                rhs.noalias() += target * a;
            }
            const Eigen::VectorXd x = solve_ridge(std::move(gram), rhs, options.lambda);
            for (std::size_t f = 0; f < k; ++f) {
                model.job_factors[j * k + f] = x[static_cast<Eigen::Index>(f)];
            }
            model.job_bias[j] = x[static_cast<Eigen::Index>(k)];
        }
        check_finite(model.job_factors, "job factors");
        check_finite(model.job_bias, "job biases");
        record();

        if (sets) {
            // Implicit factors, one item at a time with all others fixed.
            std::vector<double> sums(m * k, 0.0);
            for (std::size_t u = 0; u < m; ++u) {
                for (std::size_t i : (*sets)[u]) {
                    for (std::size_t f = 0; f < k; ++f) {
                        sums[u * k + f] += model.implicit_factors[i * k + f];
                    }
                }
            }
            const auto kk = static_cast<Eigen::Index>(k);
            for (std::size_t i = 0; i < n; ++i) {
                if (holders[i].empty()) {
                    continue;
                }
                Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(kk, kk);
                Eigen::VectorXd rhs = Eigen::VectorXd::Zero(kk);
                Eigen::VectorXd a(kk);
                for (std::size_t u : holders[i]) {
                    const double s = 1.0 / std::sqrt(static_cast<double>((*sets)[u].size()));
                    for (std::size_t e : by_user[u]) {
                        const auto& r = matrix.entries[e];
                        const auto jr = model.job_row(r.job);
                        const auto ur = model.user_row(u);
                        double pred = model.mu + model.user_bias[u] + model.job_bias[r.job];
                        for (std::size_t f = 0; f < k; ++f) {
                            const double others = sums[u * k + f] - model.implicit_factors[i * k + f];
                            pred += jr[f] * (ur[f] + s * others);
                            a[static_cast<Eigen::Index>(f)] = s * jr[f];
                        }
                        gram.noalias() += a * a.transpose();
                        rhs.noalias() += (r.value - pred) * a;
                    }
                }
                const Eigen::VectorXd y = solve_ridge(std::move(gram), rhs, options.lambda);
                for (std::size_t u : holders[i]) {
                    for (std::size_t f = 0; f < k; ++f) {
                        sums[u * k + f] += y[static_cast<Eigen::Index>(f)] - model.implicit_factors[i * k + f];
                    }
                }
                for (std::size_t f = 0; f < k; ++f) {
                    model.implicit_factors[i * k + f] = y[static_cast<Eigen::Index>(f)];
                }
            }
            check_finite(model.implicit_factors, "implicit factors");
            record();
        }
        if (report) {
            report->mse_per_iteration.push_back(observed_mse(model, matrix, sets));
        }
    }
    return model;
}

double predict_biased(const FactorModel& model, std::size_t u, std::size_t j) {
    if (u >= model.users.size() || j >= model.jobs.size()) {
        throw std::out_of_range("user or job index outside the model");
    }
    return model.mu + model.user_bias[u] + model.job_bias[j] + dot(model.job_row(j), model.user_row(u));
}

double predict_implicit(const FactorModel& model, std::size_t u, std::size_t j,
                        std::span<const std::size_t> implicit_items) {
    if (u >= model.users.size() || j >= model.jobs.size()) {
        throw std::out_of_range("user or job index outside the model");
    }
    const auto ur = model.user_row(u);
    std::vector<double> effective(ur.begin(), ur.end());
    if (!implicit_items.empty()) {
        const double s = 1.0 / std::sqrt(static_cast<double>(implicit_items.size()));
        std::vector<double> total(model.k, 0.0);
        for (std::size_t i : implicit_items) {
            if (i >= model.jobs.size()) {
                throw std::out_of_range("implicit item outside the model");
            }
            const auto y = model.implicit_row(i);
            for (std::size_t f = 0; f < model.k; ++f) {
                total[f] += y[f];
            }
        }
        for (std::size_t f = 0; f < model.k; ++f) {
            effective[f] += s * total[f];
        }
    }
    return model.mu + model.user_bias[u] + model.job_bias[j] + dot(model.job_row(j), effective);
}

ResolvedItems resolve_items(const FactorModel& model, std::span<const std::string> job_ids) {
    ResolvedItems out;
    for (const auto& id : job_ids) {
        if (const auto row = model.job_index(id)) {
            out.rows.push_back(*row);
        } else {
            out.unknown.push_back(id);
        }
    }
    return out;
}

std::vector<ScoredJob> recommend_mf(const FactorModel& model, std::string_view user, std::size_t k,
                                    const std::set<std::string, std::less<>>& exclusions,
                                    const std::set<std::string, std::less<>>* eligible,
                                    std::span<const std::size_t> implicit_items) {
    const auto u = model.user_index(user);
    if (!u) {
        throw std::out_of_range(fmt::format("user '{}' is unknown to the model", user));
    }
    std::vector<ScoredJob> scored;
    for (std::size_t j = 0; j < model.jobs.size(); ++j) {
        const auto& id = model.jobs[j];
        if (exclusions.contains(id) || (eligible && !eligible->contains(id))) {
            continue;
        }
        scored.push_back({id, predict_implicit(model, *u, j, implicit_items)});
    }
    std::sort(scored.begin(), scored.end(), [](const ScoredJob& a, const ScoredJob& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return a.job_id < b.job_id;
    });
    if (scored.size() > k) {
        scored.resize(k);
    }
    return scored;
}

namespace {

template <class RowLookup>
ImplicitSets clicks_to_sets(const std::vector<std::string>& users, RowLookup&& job_row,
                            std::span<const DedupedSignal> signals) {
    ImplicitSets sets(users.size());
    for (const auto& sig : signals) {
        if (sig.kind != SignalKind::Click) {
            continue;
        }
        const auto u = index_of(users, sig.user_id);
        const auto j = job_row(sig.job_id);
        if (u && j) {
            sets[*u].push_back(*j);
        }
    }
    for (auto& s : sets) {
        std::sort(s.begin(), s.end());
        s.erase(std::unique(s.begin(), s.end()), s.end());
    }
    return sets;
}

}  // namespace

ImplicitSets implicit_sets_from_clicks(const FactorModel& model, std::span<const DedupedSignal> signals) {
    return clicks_to_sets(model.users, [&](std::string_view id) { return model.job_index(id); }, signals);
}

ImplicitSets implicit_sets_from_clicks(const RatingsMatrix& matrix, std::span<const DedupedSignal> signals) {
    return clicks_to_sets(matrix.users, [&](std::string_view id) { return index_of(matrix.jobs, id); },
                          signals);
}

}  // namespace jobrec::mf
