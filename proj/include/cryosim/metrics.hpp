#pragma once
#include <array>
#include <string>
#include <vector>

#include "cryosim/volume.hpp"

namespace cryosim {

struct FscShell {
    double frequency = 0;    // shell index in frequency voxels (1/box units)
    double correlation = 0;  // [-1, 1]
    long count = 0;          // Fourier samples in the shell
    bool zero_energy = false;
};

struct FscCurve {
    std::vector<FscShell> shells; // strictly increasing frequency
};

// Shell-wise normalized cross-correlation of the two spectra, integer-radius
// shells of width one frequency voxel. Requires matching cubic grids.
FscCurve fsc(const DensityVolume& a, const DensityVolume& b);

struct ResolutionResult {
    double frequency = 0; // shell units; linearly interpolated crossing
    bool crossed = false; // false: never dropped below, Nyquist returned
};
ResolutionResult resolution_at(const FscCurve& curve, double threshold);

struct ScoredPick {
    double x = 0, y = 0;   // pixels
    double confidence = 1; // [0, 1]
};

struct LabeledPick {
    double x = 0, y = 0;
    double confidence = 1;
    bool tp = false;
};

struct MatchResult {
    std::vector<LabeledPick> picks; // input order
    long fn = 0;                    // unmatched ground truth
    long gt_total = 0;
};

// Greedy matching in descending confidence; each ground-truth center is
// consumed by at most one pick within d_match.
MatchResult match_picks(const std::vector<ScoredPick>& picks,
                        const std::vector<std::array<double, 2>>& gt, double d_match);

struct PrLevel {
    double threshold = 0;
    double precision = 0, recall = 0;
    long tp = 0, fp = 0, fn = 0;
};

struct PrCurve {
    std::vector<PrLevel> levels;   // descending threshold (recall non-decreasing)
    bool zero_positive_flag = false;
};

// n_levels > 0: equally spaced thresholds over [0, 1]. n_levels = 0:
// thresholds at every distinct confidence (the exact curve; default for
// AUPRC so the summation matches enumeration oracles).
PrCurve pr_curve(const MatchResult& match, int n_levels = 0);

// AUPRC = sum_k Pr(k) (Re(k) - Re(k-1))
double auprc(const PrCurve& curve);
double precision_at(const MatchResult& match, double tau);

struct PosePair {
    std::array<double, 9> r_gt{};  // row-major rotation
    std::array<double, 9> r_pred{};
    std::array<double, 2> t_gt{};  // pixels
    std::array<double, 2> t_pred{};
};

struct PoseBatch {
    std::vector<PosePair> pairs;
    void validate() const; // orthonormal, det +1 within 1e-6
};

// mean arccos between R_gt v and R_pred v for v = (0,0,1)
double angular_error_radians(const PoseBatch& batch);
// same with the printed 180/pi prefactor applied
double angular_error_paper(const PoseBatch& batch);

// mean of 1/9 |R_gt - R_pred|_F^2 + 1/2 |T_gt - T_pred|_1
double pose_loss(const PoseBatch& batch);

} // namespace cryosim
