#pragma once

#include <optional>
#include <string>
#include <vector>

#include "deepfeat/matrix.hpp"

namespace deepfeat::ensemble {

struct VoteMember {
  std::string id;
  std::vector<int> labels;
  std::optional<Matrix> scores;  // n x C
};

struct VoteInput {
  std::vector<VoteMember> members;
  std::vector<double> weights;  // empty = equal weights
  std::size_t num_classes = 0;
};

enum class TieBreak {
  LowestIndex,  // ties go to the lowest class index
  SummedScores  // ties go to the tied class with the largest summed member score, then lowest index
};

/// Weighted plurality of member labels per sample.
///
/// Members are combined in ascending id order, so the result does not depend
/// on the order they were listed in. Ids must be unique.
std::vector<int> hard_vote(const VoteInput& v, TieBreak tie_break = TieBreak::LowestIndex);

/// Weighted mean of member score rows, then argmax (ties: lowest index).
std::vector<int> soft_vote(const VoteInput& v);

}  // namespace deepfeat::ensemble
