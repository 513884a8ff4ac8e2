#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "dnrnn/error.hpp"
#include "dnrnn/numerics.hpp"

namespace dnrnn {

// Per-channel feature matrices sharing a row count, plus one-hot labels.
struct MultiChannelDataset {
  std::vector<Matrix> channels;
  Matrix labels;  // N x K one-hot
  std::vector<std::string> channel_names;
  std::vector<std::string> class_names;  // optional; empty or size K
  std::string meta;

  Eigen::Index rows() const { return labels.rows(); }
  Eigen::Index label_count() const { return labels.cols(); }
  std::size_t channel_count() const { return channels.size(); }

  // Fills missing channel names with "ch<i>".
  void name_channels() {
    for (std::size_t c = channel_names.size(); c < channels.size(); ++c) channel_names.push_back("ch" + std::to_string(c));
  }

  void validate() const {
    if (channels.empty()) throw Error(ErrorCode::dataset, "dataset has no channels");
    if (channel_names.size() != channels.size())
      throw Error(ErrorCode::dataset, "channel_names must have one entry per channel");
    for (std::size_t c = 0; c < channels.size(); ++c) {
      if (channels[c].rows() != labels.rows()) {
        std::ostringstream os;
        os << "channel " << channel_names[c] << " has " << channels[c].rows() << " rows, labels have "
           << labels.rows();
        throw Error(ErrorCode::dataset, os.str());
      }
    }
    check_one_hot(labels);
  }

  static void check_one_hot(const Matrix& Y) {
    for (Eigen::Index i = 0; i < Y.rows(); ++i) {
      int ones = 0;
      for (Eigen::Index k = 0; k < Y.cols(); ++k) {
        const double v = Y(i, k);
        if (v == 1.0)
          ++ones;
        else if (v != 0.0)
          ones = -1000;
      }
      if (ones != 1) {
        std::ostringstream os;
        os << "label row " << i << " is not one-hot";
        throw Error(ErrorCode::label_format, os.str());
      }
    }
  }
};

}  // namespace dnrnn
