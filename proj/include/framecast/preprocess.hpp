#pragma once

#include <vector>

#include "framecast/data.hpp"
#include "framecast/model.hpp"
#include "framecast/tensor.hpp"

namespace fc {

struct PrepConfig {
    double gaussian_sigma = 1.0;
    bool invert = true;
    bool scale_to_unit = true;
};

/// Separable Gaussian blur, kernel truncated at 3 sigma, reflect padding
/// (edge repeated), kernel normalized so the image mean is preserved.
/// sigma == 0 is the identity.
Tensor2 gaussian_blur(const Tensor2& img, double sigma);

/// I <- 255 - I, elementwise on a 0..255-range matrix.
Tensor2 invert255(const Tensor2& img);

/// Frame -> real matrix: blur, then optional inversion, then scale by 1/255.
Tensor2 preprocess(const Frame& frame, const PrepConfig& cfg);

/// Row-major flatten to a pixels x 1 column.
Tensor2 as_column(const Tensor2& m);

/// Preprocesses all frames of an episode and packs actions/states into
/// column vectors.
PreparedEpisode prepare_episode(const Episode& ep, const PrepConfig& cfg);

std::vector<PreparedEpisode> prepare_dataset(const Dataset& ds, const PrepConfig& cfg);

/// Rounds a unit-range matrix back to 8-bit intensities (255*v, nearest).
Frame quantize_frame(const Tensor2& m);

} // namespace fc
