#pragma once

#include <vector>

namespace errdyn {

double median(std::vector<double> xs);

// unbiased sample variance; 0 for fewer than 2 points
double sample_variance(const std::vector<double>& xs);

// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

// Steps whose loss increment exceeds twice the trailing-median magnitude
// of increments over `window` preceding entries. The first entry has no
// trailing context and is never counted.
int overshoot_count(const std::vector<double>& increments, int window = 50);

// Fraction of consecutive sign changes, zero entries skipped.
double sign_flip_rate(const std::vector<double>& xs);

}  // namespace errdyn
