#include "prosper/bench.hpp"

#include <algorithm>
#include <cstdio>

#include "json.hpp"
#include "prosper/binio.hpp"
#include "prosper/error.hpp"

namespace prosper {

namespace {

const SparsityPoint &nearest(const std::vector<SparsityPoint> &log, std::size_t step) {
    auto it = std::lower_bound(log.begin(), log.end(), step,
                               [](const SparsityPoint &p, std::size_t s) { return p.step < s; });
    if (it == log.end()) {
        return log.back();
    }
    if (it == log.begin() || it->step == step) {
        return *it;
    }
    const auto prev = std::prev(it);
    return step - prev->step <= it->step - step ? *prev : *it;
}

}  // namespace

std::vector<SparsityPoint> parse_sparsity_log(std::string_view text, const std::string &what) {
    std::vector<SparsityPoint> out;
    std::size_t lineno = 0;
    for (auto line : split_lines(text)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const auto where = what + ":" + std::to_string(lineno) + ": ";
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception &e) {
            fail(ErrorKind::Format, where + "invalid JSON (" + e.what() + ")");
        }
        SparsityPoint p;
        try {
            p.step = j.at("step").get<std::size_t>();
            p.nnz_q_mean = j.at("nnz_q_mean").get<double>();
            p.nnz_d_mean = j.at("nnz_d_mean").get<double>();
        } catch (const nlohmann::json::exception &e) {
            fail(ErrorKind::Format, where + "missing or mistyped field (" + e.what() + ")");
        }
        if (!out.empty() && p.step <= out.back().step) {
            fail(ErrorKind::Format, where + "steps must be strictly increasing");
        }
        out.push_back(p);
    }
    if (out.empty()) {
        fail(ErrorKind::Format, what + ": empty training log");
    }
    return out;
}

std::vector<SparsityPoint> read_sparsity_log(const std::filesystem::path &path) {
    return parse_sparsity_log(read_file(path), path.string());
}

std::string bench_sparsity(const std::vector<SparsityPoint> &on, const std::vector<SparsityPoint> &off) {
    require(!on.empty() && !off.empty(), "bench_sparsity: empty training log");
    std::vector<std::size_t> steps;
    for (const auto &p : on) {
        steps.push_back(p.step);
    }
    for (const auto &p : off) {
        steps.push_back(p.step);
    }
    std::sort(steps.begin(), steps.end());
    steps.erase(std::unique(steps.begin(), steps.end()), steps.end());

    std::string csv = "step,nnz_q_on,nnz_d_on,nnz_q_off,nnz_d_off\n";
    char buf[160];
    for (auto s : steps) {
        const auto &a = nearest(on, s);
        const auto &b = nearest(off, s);
        std::snprintf(buf, sizeof(buf), "%zu,%.6g,%.6g,%.6g,%.6g\n", s, a.nnz_q_mean, a.nnz_d_mean, b.nnz_q_mean,
                      b.nnz_d_mean);
        csv += buf;
    }
    return csv;
}

}  // namespace prosper
