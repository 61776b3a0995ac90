#include "jobrec/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "jobrec/csv.hpp"

namespace jobrec {

double mle(std::uint32_t co_count, std::uint32_t count_j) {
    if (count_j == 0) {
        return 0.0;
    }
    return static_cast<double>(co_count) / static_cast<double>(count_j);
}

double mle(const JobMultiGraph& graph, JobIndex i, JobIndex j, Signal signal) {
    return mle(graph.costats(i, j).count(signal), graph.stats(j).count(signal));
}

std::optional<double> pmi2(std::uint32_t co_count, std::uint32_t count_i, std::uint32_t count_j) {
    if (co_count == 0 || count_i == 0 || count_j == 0) {
        return std::nullopt;
    }
    const double co = static_cast<double>(co_count);
    return std::log(co * co / (static_cast<double>(count_i) * static_cast<double>(count_j)));
}

std::optional<double> pmi2(const JobMultiGraph& graph, JobIndex i, JobIndex j, Signal signal) {
    return pmi2(graph.costats(i, j).count(signal), graph.stats(i).count(signal),
                graph.stats(j).count(signal));
}

double embed_sim(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("embedding dimensions differ");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        dot += a[k] * b[k];
        na += a[k] * a[k];
        nb += b[k] * b[k];
    }
    if (!(na > 0.0) || !(nb > 0.0)) {
        throw std::invalid_argument("zero-norm embedding");
    }
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::vector<ContentEdge> content_edges(const EmbeddingTable& embeddings, double gamma,
                                       const JobCatalog* block_by_category) {
    struct Unit {
        const std::string* id;
        const std::string* category;
        std::vector<double> v;
    };
    std::vector<Unit> units;
    units.reserve(embeddings.size());
    for (const auto& [id, vec] : embeddings.entries()) {
        double norm = 0.0;
        for (double x : vec) {
            norm += x * x;
        }
        norm = std::sqrt(norm);
        Unit u{&id, nullptr, vec};
        for (double& x : u.v) {
            x /= norm;
        }
        if (block_by_category) {
            if (const auto* job = block_by_category->find(id)) {
                u.category = &job->category;
            }
        }
        units.push_back(std::move(u));
    }

    std::vector<ContentEdge> out;
    for (std::size_t x = 0; x < units.size(); ++x) {
        for (std::size_t y = x + 1; y < units.size(); ++y) {
            if (block_by_category &&
                (!units[x].category || !units[y].category || *units[x].category != *units[y].category)) {
                continue;
            }
            double dot = 0.0;
            const auto& a = units[x].v;
            const auto& b = units[y].v;
            for (std::size_t k = 0; k < a.size(); ++k) {
                dot += a[k] * b[k];
            }
            const double sim = std::clamp(dot, -1.0, 1.0);
            if (sim >= gamma) {
                out.push_back({*units[x].id, *units[y].id, sim});
            }
        }
    }
    return out;
}

void ScoreWeights::validate() const {
    for (double w : {w1, w2, w3}) {
        if (!std::isfinite(w) || w < 0.0) {
            throw ConfigError("score weights must be finite and non-negative");
        }
    }
    if (w1 + w2 + w3 <= 0.0) {
        throw ConfigError("at least one score weight must be positive");
    }
    if (!(gamma >= -1.0 && gamma <= 1.0)) {
        throw ConfigError("gamma must lie in [-1, 1]");
    }
}

RecDigraph::RecDigraph(std::vector<std::string> ids, std::vector<bool> active,
                       std::vector<std::vector<DigraphEdge>> out_edges)
    : ids_(std::move(ids)), active_(std::move(active)), out_(std::move(out_edges)) {
    if (active_.size() != ids_.size() || out_.size() != ids_.size()) {
        throw InvariantError("digraph node tables disagree in size");
    }
    if (!std::is_sorted(ids_.begin(), ids_.end()) ||
        std::adjacent_find(ids_.begin(), ids_.end()) != ids_.end()) {
        throw InvariantError("digraph node ids must be sorted and unique");
    }
    for (std::size_t src = 0; src < out_.size(); ++src) {
        const auto& row = out_[src];
        for (std::size_t e = 0; e < row.size(); ++e) {
            if (row[e].dst >= ids_.size() || !active_[row[e].dst] || row[e].dst == src ||
                (e > 0 && row[e - 1].dst >= row[e].dst)) {
                throw InvariantError(fmt::format("bad digraph edge from '{}'", ids_[src]));
            }
        }
        edge_count_ += row.size();
    }
}

std::optional<JobIndex> RecDigraph::find(std::string_view job_id) const {
    const auto it = std::lower_bound(ids_.begin(), ids_.end(), job_id);
    if (it == ids_.end() || *it != job_id) {
        return std::nullopt;
    }
    return static_cast<JobIndex>(it - ids_.begin());
}

std::optional<double> RecDigraph::corr(JobIndex src, JobIndex dst) const {
    const auto& row = out_.at(src);
    const auto it = std::lower_bound(row.begin(), row.end(), dst,
                                     [](const DigraphEdge& e, JobIndex d) { return e.dst < d; });
    if (it == row.end() || it->dst != dst) {
        return std::nullopt;
    }
    return it->corr;
}

namespace {

std::string opt_field(const std::optional<double>& v) {
    return v ? csv::format_double(*v) : std::string{};
}

double required_double(const std::string& text, std::size_t line_no) {
    const auto v = csv::parse_double(text);
    if (!v || !std::isfinite(*v)) {
        throw InputError(fmt::format("digraph line {}: invalid number '{}'", line_no, text));
    }
    return *v;
}

std::optional<double> optional_double(const std::string& text, std::size_t line_no) {
    if (csv::trim(text).empty()) {
        return std::nullopt;
    }
    return required_double(text, line_no);
}

}  // namespace

void RecDigraph::write(std::ostream& out) const {
    for (std::size_t src = 0; src < out_.size(); ++src) {
        for (const auto& e : out_[src]) {
            out << csv::quote(ids_[src]) << ',' << csv::quote(ids_[e.dst]) << ','
                << csv::format_double(e.corr) << ',' << csv::format_double(e.p_apps) << ','
                << csv::format_double(e.p_clicks) << ',' << opt_field(e.pmi2_apps) << ','
                << opt_field(e.pmi2_clicks) << ',' << opt_field(e.sim_e) << '\n';
        }
    }
}

RecDigraph RecDigraph::load(std::istream& in, std::vector<std::string> ids, std::vector<bool> active) {
    if (ids.size() != active.size()) {
        throw InputError("digraph node tables disagree in size");
    }
    // Sort nodes by id, carrying the active flags along.
    std::vector<std::size_t> order(ids.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        order[k] = k;
    }
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return ids[a] < ids[b]; });
    std::vector<std::string> sorted_ids;
    std::vector<bool> sorted_active;
    for (auto k : order) {
        sorted_ids.push_back(std::move(ids[k]));
        sorted_active.push_back(active[k]);
    }
    if (std::adjacent_find(sorted_ids.begin(), sorted_ids.end()) != sorted_ids.end()) {
        throw InputError("digraph: duplicate node id");
    }

    auto lookup = [&](const std::string& id, std::size_t line_no) {
        const auto it = std::lower_bound(sorted_ids.begin(), sorted_ids.end(), id);
        if (it == sorted_ids.end() || *it != id) {
            throw InputError(fmt::format("digraph line {}: unknown job '{}'", line_no, id));
        }
        return static_cast<JobIndex>(it - sorted_ids.begin());
    };

    std::vector<std::vector<DigraphEdge>> out(sorted_ids.size());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (csv::trim(line).empty()) {
            continue;
        }
        const auto f = csv::split(line);
        if (!f || f->size() != 8) {
            throw InputError(fmt::format("digraph line {}: expected 8 columns", line_no));
        }
        const JobIndex src = lookup((*f)[0], line_no);
        DigraphEdge e;
        e.dst = lookup((*f)[1], line_no);
        if (!sorted_active[e.dst]) {
            throw InputError(fmt::format("digraph line {}: edge ends at inactive job", line_no));
        }
        e.corr = required_double((*f)[2], line_no);
        e.p_apps = required_double((*f)[3], line_no);
        e.p_clicks = required_double((*f)[4], line_no);
        e.pmi2_apps = optional_double((*f)[5], line_no);
        e.pmi2_clicks = optional_double((*f)[6], line_no);
        e.sim_e = optional_double((*f)[7], line_no);
        out[src].push_back(e);
    }
    for (auto& row : out) {
        std::sort(row.begin(), row.end(),
                  [](const DigraphEdge& a, const DigraphEdge& b) { return a.dst < b.dst; });
        if (std::adjacent_find(row.begin(), row.end(), [](const auto& a, const auto& b) {
                return a.dst == b.dst;
            }) != row.end()) {
            throw InputError("digraph: duplicate edge");
        }
    }
    try {
        return RecDigraph(std::move(sorted_ids), std::move(sorted_active), std::move(out));
    } catch (const InvariantError& e) {
        throw InputError(e.what());
    }
}

RecDigraph aggregate(const JobMultiGraph& graph, std::span<const ContentEdge> content,
                     const ScoreWeights& weights, const std::vector<bool>& active) {
    weights.validate();
    const std::size_t n = graph.node_count();
    if (active.size() != n) {
        throw std::invalid_argument("active mask size differs from graph");
    }

    std::vector<std::vector<std::pair<JobIndex, double>>> sims(n);
    for (const auto& edge : content) {
        const auto a = graph.find(edge.a);
        const auto b = graph.find(edge.b);
        if (!a || !b || *a == *b) {
            continue;
        }
        sims[*a].emplace_back(*b, edge.sim);
        sims[*b].emplace_back(*a, edge.sim);
    }
    for (auto& row : sims) {
        std::sort(row.begin(), row.end());
    }

    auto pmi_term = [&](const std::optional<double>& v) {
        if (!v) {
            return 0.0;
        }
        return weights.normalize_pmi2 ? std::exp(*v) : *v;
    };

    std::vector<std::vector<DigraphEdge>> out(n);
    for (JobIndex src = 0; src < n; ++src) {
        const auto behavioral = graph.adjacent(src);
        const auto& content_row = sims[src];
        std::size_t bi = 0, ci = 0;
        while (bi < behavioral.size() || ci < content_row.size()) {
            JobIndex dst;
            if (ci >= content_row.size() ||
                (bi < behavioral.size() && behavioral[bi].other <= content_row[ci].first)) {
                dst = behavioral[bi].other;
            } else {
                dst = content_row[ci].first;
            }
            DigraphEdge e;
            e.dst = dst;
            if (bi < behavioral.size() && behavioral[bi].other == dst) {
                const CoStats& co = behavioral[bi].stats;
                const NodeStats& s_src = graph.stats(src);
                const NodeStats& s_dst = graph.stats(dst);
                e.p_apps = mle(co.co_apps, s_src.total_apps);
                e.p_clicks = mle(co.co_clicks, s_src.total_clicks);
                e.pmi2_apps = pmi2(co.co_apps, s_dst.total_apps, s_src.total_apps);
                e.pmi2_clicks = pmi2(co.co_clicks, s_dst.total_clicks, s_src.total_clicks);
                ++bi;
            }
            if (ci < content_row.size() && content_row[ci].first == dst) {
                e.sim_e = content_row[ci].second;
                ++ci;
            }
            if (!active[dst]) {
                continue;
            }
            e.corr = weights.w1 * (e.p_apps + e.p_clicks) +
                     weights.w2 * (pmi_term(e.pmi2_apps) + pmi_term(e.pmi2_clicks)) +
                     weights.w3 * e.sim_e.value_or(0.0);
            out[src].push_back(e);
        }
    }
    return RecDigraph(std::vector<std::string>(graph.ids().begin(), graph.ids().end()), active,
                      std::move(out));
}

std::vector<bool> active_mask(std::span<const std::string> ids, const JobCatalog& catalog) {
    std::vector<bool> out(ids.size(), false);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto* job = catalog.find(ids[i]);
        out[i] = job != nullptr && job->is_active();
    }
    return out;
}

}  // namespace jobrec
