#include "homeauth/eval.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <ostream>

#include "homeauth/error.hpp"
#include "homeauth/rng.hpp"

namespace homeauth {

using nlohmann::json;

std::vector<Fold> kfold_by_session(std::span<const SessionLog> sessions, int k, std::uint64_t seed) {
    if (k < 2) throw ArgumentError("k must be >= 2");
    if (sessions.empty()) throw ArgumentError("no sessions to split");
    std::map<UserId, std::vector<std::size_t>> by_user;
    for (std::size_t i = 0; i < sessions.size(); ++i) by_user[sessions[i].user].push_back(i);

    Rng rng(seed);
    for (auto& [user, idx] : by_user) rng.shuffle(idx);

    std::vector<Fold> folds(static_cast<std::size_t>(k));
    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<std::uint8_t> is_test(sessions.size(), 0);
        for (const auto& [user, idx] : by_user) {
            const std::size_t s = idx[f % idx.size()];
            folds[f].test.push_back(s);
            is_test[s] = 1;
        }
        for (std::size_t i = 0; i < sessions.size(); ++i) {
            if (!is_test[i]) folds[f].train.push_back(i);
        }
    }
    return folds;
}

std::size_t session_prediction(std::span<const AuthScore> window_scores) {
    if (window_scores.empty()) throw ArgumentError("session has no window scores");
    const std::size_t m = window_scores.front().probs.size();
    std::vector<std::size_t> votes(m, 0);
    std::vector<double> mass(m, 0.0);
    for (const auto& s : window_scores) {
        if (s.probs.size() != m) throw ArgumentError("window scores over different user sets");
        ++votes[s.argmax];
        for (std::size_t i = 0; i < m; ++i) mass[i] += s.probs[i];
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < m; ++i) {
        if (votes[i] > votes[best] || (votes[i] == votes[best] && mass[i] > mass[best])) best = i;
    }
    return best;
}

ConfusionMatrix::ConfusionMatrix(std::vector<UserId> users)
    : users_(std::move(users)), counts_(users_.size() * users_.size(), 0), abstain_(users_.size(), 0) {}

ConfusionMatrix::ConfusionMatrix(std::vector<UserId> users, std::vector<std::vector<std::size_t>> counts)
    : ConfusionMatrix(std::move(users)) {
    if (counts.size() != size()) throw ArgumentError("confusion matrix: row count differs from user count");
    for (std::size_t r = 0; r < size(); ++r) {
        if (counts[r].size() != size()) throw ArgumentError("confusion matrix: matrix must be square");
        for (std::size_t c = 0; c < size(); ++c) counts_[r * size() + c] = counts[r][c];
    }
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::size_t n) {
    if (truth >= size() || predicted >= size()) throw ArgumentError("confusion matrix index out of range");
    counts_[truth * size() + predicted] += n;
}

void ConfusionMatrix::add_abstain(std::size_t truth, std::size_t n) { abstain_.at(truth) += n; }

std::size_t ConfusionMatrix::row_sum(std::size_t truth) const {
    std::size_t s = 0;
    for (std::size_t c = 0; c < size(); ++c) s += at(truth, c);
    return s;
}

std::size_t ConfusionMatrix::column_sum(std::size_t predicted) const {
    std::size_t s = 0;
    for (std::size_t r = 0; r < size(); ++r) s += at(r, predicted);
    return s;
}

std::size_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0}); }

std::size_t ConfusionMatrix::total_abstained() const {
    return std::accumulate(abstain_.begin(), abstain_.end(), std::size_t{0});
}

void ConfusionMatrix::write_csv(std::ostream& out) const {
    out << "true\\predicted";
    for (const auto& u : users_) out << ',' << u;
    out << ",abstain\n";
    for (std::size_t r = 0; r < size(); ++r) {
        out << users_[r];
        for (std::size_t c = 0; c < size(); ++c) out << ',' << at(r, c);
        out << ',' << abstain_[r] << '\n';
    }
}

json ConfusionMatrix::to_json() const {
    json rows = json::array();
    for (std::size_t r = 0; r < size(); ++r) {
        std::vector<std::size_t> row(counts_.begin() + static_cast<std::ptrdiff_t>(r * size()),
                                     counts_.begin() + static_cast<std::ptrdiff_t>((r + 1) * size()));
        rows.push_back(row);
    }
    return json{{"users", users_}, {"counts", rows}, {"abstain", abstain_}};
}

double f1_score(double precision, double recall) noexcept {
    if (precision + recall <= 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

MetricReport compute_metrics(const ConfusionMatrix& cm) {
    MetricReport r;
    r.users = cm.users();
    const std::size_t m = cm.size();
    r.evaluated = cm.total();
    r.abstained = cm.total_abstained();
    const std::size_t all = r.evaluated + r.abstained;
    r.coverage = all ? static_cast<double>(r.evaluated) / static_cast<double>(all) : 0.0;

    std::size_t diag = 0;
    for (std::size_t u = 0; u < m; ++u) {
        ClassMetrics c;
        const std::size_t tp = cm.at(u, u);
        diag += tp;
        const std::size_t col = cm.column_sum(u);
        c.support = cm.row_sum(u);
        c.precision = col ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
        c.recall = c.support ? static_cast<double>(tp) / static_cast<double>(c.support) : 0.0;
        c.f1 = f1_score(c.precision, c.recall);
        r.per_user.push_back(c);
    }
    if (r.evaluated == 0) {
        r.micro.support = r.macro.support = r.weighted.support = 0;
        return r;
    }
    r.accuracy = static_cast<double>(diag) / static_cast<double>(r.evaluated);
    // Pooled one-vs-rest counts: every false positive is another class's false negative.
    r.micro.precision = r.micro.recall = r.accuracy;
    r.micro.f1 = f1_score(r.micro.precision, r.micro.recall);
    r.micro.support = r.macro.support = r.weighted.support = r.evaluated;
    for (const auto& c : r.per_user) {
        r.macro.precision += c.precision;
        r.macro.recall += c.recall;
        r.macro.f1 += c.f1;
        const double w = static_cast<double>(c.support) / static_cast<double>(r.evaluated);
        r.weighted.precision += w * c.precision;
        r.weighted.recall += w * c.recall;
        r.weighted.f1 += w * c.f1;
    }
    r.macro.precision /= static_cast<double>(m);
    r.macro.recall /= static_cast<double>(m);
    r.macro.f1 /= static_cast<double>(m);
    return r;
}

namespace {

json metrics_json(const ClassMetrics& c) {
    return json{{"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}, {"support", c.support}};
}

}  // namespace

json MetricReport::to_json() const {
    json per = json::object();
    for (std::size_t i = 0; i < users.size(); ++i) per[users[i]] = metrics_json(per_user[i]);
    return json{{"per_user", per},
                {"micro", metrics_json(micro)},
                {"macro", metrics_json(macro)},
                {"weighted", metrics_json(weighted)},
                {"accuracy", accuracy},
                {"coverage", coverage},
                {"evaluated", evaluated},
                {"abstained", abstained}};
}

RocCurve roc_curve(std::span<const double> scores, std::span<const std::uint8_t> positive, std::string label) {
    if (scores.size() != positive.size()) throw ArgumentError("roc: scores and labels differ in length");
    RocCurve c;
    c.label = std::move(label);
    for (auto p : positive) (p ? c.positives : c.negatives) += 1;
    c.defined = c.positives > 0 && c.negatives > 0;
    if (!c.defined) return c;

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    const double P = static_cast<double>(c.positives), N = static_cast<double>(c.negatives);
    std::size_t tp = 0, fp = 0;
    c.points.push_back({0.0, 0.0});
    for (std::size_t i = 0; i < order.size();) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            (positive[order[i]] ? tp : fp) += 1;
            ++i;
        }
        c.points.push_back({static_cast<double>(fp) / N, static_cast<double>(tp) / P});
    }
    for (std::size_t i = 1; i < c.points.size(); ++i) {
        const auto& a = c.points[i - 1];
        const auto& b = c.points[i];
        c.auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
    }
    return c;
}

RocSet roc_curves(std::span<const std::size_t> truth, std::span<const AuthScore> scores) {
    if (truth.size() != scores.size()) throw ArgumentError("roc: truth and scores differ in length");
    RocSet set;
    if (scores.empty()) return set;
    const auto& users = scores.front().users;
    const std::size_t m = users.size();
    std::vector<double> pooled_scores;
    std::vector<std::uint8_t> pooled_pos;
    pooled_scores.reserve(scores.size() * m);
    pooled_pos.reserve(scores.size() * m);
    for (std::size_t u = 0; u < m; ++u) {
        std::vector<double> s(scores.size());
        std::vector<std::uint8_t> pos(scores.size());
        for (std::size_t i = 0; i < scores.size(); ++i) {
            s[i] = scores[i].probs.at(u);
            pos[i] = truth[i] == u ? 1 : 0;
        }
        pooled_scores.insert(pooled_scores.end(), s.begin(), s.end());
        pooled_pos.insert(pooled_pos.end(), pos.begin(), pos.end());
        set.per_user.push_back(roc_curve(s, pos, users[u]));
    }
    set.micro = roc_curve(pooled_scores, pooled_pos, "micro");
    return set;
}

}  // namespace homeauth
