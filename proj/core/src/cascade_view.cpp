#include "igniter/cascade_view.hpp"

#include <algorithm>

namespace igniter {

std::vector<std::uint8_t> influencer_mask(const InfluenceModel& model) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(model.node_count()), 0);
  for (const UserId u : model.influencer_ids) mask[static_cast<std::size_t>(u)] = 1;
  return mask;
}

PersonalizedView select_local_influence(const std::vector<UserId>& diffusion,
                                        const FollowerGraph& graph, const InfluenceModel& model,
                                        const std::vector<std::uint8_t>& is_influencer,
                                        UserId target, int m) {
  if (target < 0 || target >= model.node_count()) {
    throw error("target user id out of range: " + std::to_string(target));
  }
  if (m < 1) throw config_error("view size m must be >= 1");

  PersonalizedView view;
  view.nodes.reserve(static_cast<std::size_t>(m));

  std::vector<std::size_t> remaining;  // cascade positions not kept by pass 1
  for (std::size_t pos = 0; pos < diffusion.size(); ++pos) {
    const UserId v = diffusion[pos];
    const bool keep = is_influencer[static_cast<std::size_t>(v)] || graph.has_edge(target, v);
    if (keep && view.nodes.size() < static_cast<std::size_t>(m)) {
      view.nodes.push_back(v);
    } else if (!keep) {
      remaining.push_back(pos);
    }
  }

  if (view.nodes.size() < static_cast<std::size_t>(m) && !remaining.empty()) {
    std::vector<std::pair<double, std::size_t>> ranked;  // (similarity, cascade position)
    ranked.reserve(remaining.size());
    for (const std::size_t pos : remaining) {
      ranked.emplace_back(reposter_similarity(model, target, diffusion[pos]), pos);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (const auto& [sim, pos] : ranked) {
      if (view.nodes.size() == static_cast<std::size_t>(m)) break;
      view.nodes.push_back(diffusion[pos]);
    }
  }

  view.real_length = static_cast<int>(view.nodes.size());
  view.nodes.resize(static_cast<std::size_t>(m), kPadUser);
  return view;
}

}  // namespace igniter
