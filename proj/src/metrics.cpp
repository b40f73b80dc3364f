#include "cryosim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numeric>
#include <set>

#include "cryosim/error.hpp"
#include "cryosim/fft.hpp"

namespace cryosim {

FscCurve fsc(const DensityVolume& a, const DensityVolume& b) {
    if (a.nx != b.nx || a.ny != b.ny || a.nz != b.nz)
        fail_data("FSC requires identical dimensions");
    if (a.nx != a.ny || a.ny != a.nz) fail_data("FSC requires cubic grids");
    int n = a.nx;

    std::vector<std::complex<double>> ca(a.size()), cb(b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        ca[i] = a.data[i];
        cb[i] = b.data[i];
    }
    auto fa = fft3(ca, n, n, n);
    auto fb = fft3(cb, n, n, n);

    int n_shells = n / 2 + 1;
    std::vector<std::complex<double>> cross(n_shells, 0.0);
    std::vector<double> pa(n_shells, 0.0), pb(n_shells, 0.0);
    std::vector<long> count(n_shells, 0);

    for (int k = 0; k < n; ++k) {
        int fk = k <= n / 2 ? k : k - n;
        for (int j = 0; j < n; ++j) {
            int fj = j <= n / 2 ? j : j - n;
            for (int i = 0; i < n; ++i) {
                int fi = i <= n / 2 ? i : i - n;
                int r = static_cast<int>(std::lround(
                    std::sqrt(static_cast<double>(fi) * fi + static_cast<double>(fj) * fj +
                              static_cast<double>(fk) * fk)));
                if (r >= n_shells) continue;
                std::size_t idx = (static_cast<std::size_t>(k) * n + j) * n + i;
                cross[r] += fa[idx] * std::conj(fb[idx]);
                pa[r] += std::norm(fa[idx]);
                pb[r] += std::norm(fb[idx]);
                ++count[r];
            }
        }
    }

    FscCurve curve;
    for (int r = 0; r < n_shells; ++r) {
        FscShell shell;
        shell.frequency = r;
        shell.count = count[r];
        double denom = std::sqrt(pa[r] * pb[r]);
        if (denom > 0) {
            shell.correlation = cross[r].real() / denom;
        } else {
            shell.correlation = 0.0;
            shell.zero_energy = true;
        }
        curve.shells.push_back(shell);
    }
    return curve;
}

ResolutionResult resolution_at(const FscCurve& curve, double threshold) {
    if (curve.shells.empty()) fail_data("empty FSC curve");
    ResolutionResult res;
    for (std::size_t i = 1; i < curve.shells.size(); ++i) {
        double c0 = curve.shells[i - 1].correlation;
        double c1 = curve.shells[i].correlation;
        if (c1 < threshold && c0 >= threshold) {
            double f0 = curve.shells[i - 1].frequency;
            double f1 = curve.shells[i].frequency;
            double t = (c0 - threshold) / (c0 - c1);
            res.frequency = f0 + t * (f1 - f0);
            res.crossed = true;
            return res;
        }
    }
    res.frequency = curve.shells.back().frequency; // Nyquist
    res.crossed = false;
    return res;
}

MatchResult match_picks(const std::vector<ScoredPick>& picks,
                        const std::vector<std::array<double, 2>>& gt, double d_match) {
    if (!(d_match > 0)) fail_data("match distance must be > 0");

    MatchResult result;
    result.gt_total = static_cast<long>(gt.size());
    result.picks.resize(picks.size());
    for (std::size_t i = 0; i < picks.size(); ++i)
        result.picks[i] = {picks[i].x, picks[i].y, picks[i].confidence, false};

    std::vector<std::size_t> order(picks.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return picks[a].confidence > picks[b].confidence;
    });

    std::vector<bool> taken(gt.size(), false);
    long matched = 0;
    for (std::size_t oi : order) {
        const ScoredPick& p = picks[oi];
        double best = d_match;
        long best_g = -1;
        for (std::size_t g = 0; g < gt.size(); ++g) {
            if (taken[g]) continue;
            double dx = p.x - gt[g][0], dy = p.y - gt[g][1];
            double d = std::sqrt(dx * dx + dy * dy);
            if (d <= best) {
                best = d;
                best_g = static_cast<long>(g);
            }
        }
        if (best_g >= 0) {
            taken[best_g] = true;
            result.picks[oi].tp = true;
            ++matched;
        }
    }
    result.fn = result.gt_total - matched;
    return result;
}

namespace {

PrLevel level_at(const MatchResult& match, double tau) {
    PrLevel lv;
    lv.threshold = tau;
    for (const LabeledPick& p : match.picks) {
        if (p.confidence >= tau) p.tp ? ++lv.tp : ++lv.fp;
    }
    lv.fn = match.gt_total - lv.tp;
    lv.precision = (lv.tp + lv.fp) > 0 ? static_cast<double>(lv.tp) / (lv.tp + lv.fp) : 0.0;
    lv.recall = match.gt_total > 0 ? static_cast<double>(lv.tp) / match.gt_total : 0.0;
    return lv;
}

} // namespace

PrCurve pr_curve(const MatchResult& match, int n_levels) {
    PrCurve curve;
    if (match.gt_total == 0) curve.zero_positive_flag = true;

    std::vector<double> thresholds;
    if (n_levels > 0) {
        for (int k = 0; k < n_levels; ++k)
            thresholds.push_back(1.0 - static_cast<double>(k) / n_levels);
    } else {
        std::set<double, std::greater<double>> distinct;
        for (const LabeledPick& p : match.picks) distinct.insert(p.confidence);
        thresholds.assign(distinct.begin(), distinct.end());
    }
    for (double tau : thresholds) curve.levels.push_back(level_at(match, tau));
    return curve;
}

double auprc(const PrCurve& curve) {
    if (curve.zero_positive_flag) return 0.0;
    double area = 0.0, prev_recall = 0.0;
    for (const PrLevel& lv : curve.levels) {
        area += lv.precision * (lv.recall - prev_recall);
        prev_recall = lv.recall;
    }
    return area;
}

double precision_at(const MatchResult& match, double tau) {
    PrLevel lv = level_at(match, tau);
    return lv.precision;
}

namespace {

std::array<double, 3> apply_rot(const std::array<double, 9>& r, const std::array<double, 3>& v) {
    return {r[0] * v[0] + r[1] * v[1] + r[2] * v[2],
            r[3] * v[0] + r[4] * v[1] + r[5] * v[2],
            r[6] * v[0] + r[7] * v[1] + r[8] * v[2]};
}

} // namespace

void PoseBatch::validate() const {
    for (const PosePair& p : pairs) {
        for (const auto* r : {&p.r_gt, &p.r_pred}) {
            const auto& m = *r;
            // columns orthonormal
            for (int c1 = 0; c1 < 3; ++c1)
                for (int c2 = 0; c2 < 3; ++c2) {
                    double dot = m[c1] * m[c2] + m[3 + c1] * m[3 + c2] + m[6 + c1] * m[6 + c2];
                    double expect = c1 == c2 ? 1.0 : 0.0;
                    if (std::abs(dot - expect) > 1e-6)
                        fail_data("pose batch: rotation is not orthonormal");
                }
            double det = m[0] * (m[4] * m[8] - m[5] * m[7]) -
                         m[1] * (m[3] * m[8] - m[5] * m[6]) +
                         m[2] * (m[3] * m[7] - m[4] * m[6]);
            if (std::abs(det - 1.0) > 1e-6)
                fail_data("pose batch: rotation determinant is not +1");
        }
    }
}

double angular_error_radians(const PoseBatch& batch) {
    if (batch.pairs.empty()) return 0.0;
    const std::array<double, 3> v{0, 0, 1};
    double sum = 0;
    for (const PosePair& p : batch.pairs) {
        auto a = apply_rot(p.r_gt, v);
        auto b = apply_rot(p.r_pred, v);
        double na = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
        double nb = std::sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2]);
        double dot = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) / (na * nb);
        sum += std::acos(std::clamp(dot, -1.0, 1.0));
    }
    return sum / batch.pairs.size();
}

double angular_error_paper(const PoseBatch& batch) {
    return angular_error_radians(batch) * 180.0 / M_PI;
}

double pose_loss(const PoseBatch& batch) {
    if (batch.pairs.empty()) return 0.0;
    double sum = 0;
    for (const PosePair& p : batch.pairs) {
        double fro2 = 0;
        for (int i = 0; i < 9; ++i) {
            double d = p.r_gt[i] - p.r_pred[i];
            fro2 += d * d;
        }
        double l1 = std::abs(p.t_gt[0] - p.t_pred[0]) + std::abs(p.t_gt[1] - p.t_pred[1]);
        sum += fro2 / 9.0 + 0.5 * l1;
    }
    return sum / batch.pairs.size();
}

} // namespace cryosim
