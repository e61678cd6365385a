#pragma once

#include <cstdint>
#include <vector>

#include "igniter/corpus.hpp"
#include "igniter/influence.hpp"

namespace igniter {

/// Fixed-size, target-personalized slice of a diffusion sequence. `nodes` has
/// length exactly m, padded with kPadUser past real_length.
struct PersonalizedView {
  std::vector<UserId> nodes;
  int real_length = 0;
};

/// Per-node influencer flags (1 = cascade initiator somewhere in the corpus).
std::vector<std::uint8_t> influencer_mask(const InfluenceModel& model);

/// Local influence selection: pass 1 keeps nodes that are influencers or are
/// followed by `target`, in cascade order (truncated to m if longer); pass 2
/// fills the remainder with the nodes of highest reposter-embedding similarity
/// to `target`, appended in descending similarity, ties broken by cascade
/// position.
PersonalizedView select_local_influence(const std::vector<UserId>& diffusion,
                                        const FollowerGraph& graph, const InfluenceModel& model,
                                        const std::vector<std::uint8_t>& is_influencer,
                                        UserId target, int m);

}  // namespace igniter
