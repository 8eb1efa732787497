#pragma once

#include <vector>

#include <nlohmann/json.hpp>

namespace mpd::bart {

// Binary regression tree stored as a node array; node 0 is the root. Observations
// with x[var] <= cut go left. Pruned slots are recycled through `free_`.
class Tree {
 public:
  struct Node {
    int var = -1;
    double cut = 0.0;
    int left = -1;
    int right = -1;
    int parent = -1;
    int depth = 0;
    double mu = 0.0;
    bool alive = true;

    bool is_leaf() const { return left < 0; }
  };

  Tree() { nodes_.push_back(Node{}); }

  const Node& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  Node& node(int i) { return nodes_[static_cast<std::size_t>(i)]; }
  std::size_t capacity() const { return nodes_.size(); }

  int leaf_of(const double* x) const {
    int i = 0;
    while (!node(i).is_leaf()) i = x[node(i).var] <= node(i).cut ? node(i).left : node(i).right;
    return i;
  }
  double eval(const double* x) const { return node(leaf_of(x)).mu; }

  std::vector<int> leaves() const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(nodes_.size()); ++i)
      if (nodes_[static_cast<std::size_t>(i)].alive && nodes_[static_cast<std::size_t>(i)].is_leaf()) out.push_back(i);
    return out;
  }
  // Internal nodes whose children are both leaves.
  std::vector<int> nog_nodes() const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
      const auto& n = nodes_[static_cast<std::size_t>(i)];
      if (n.alive && !n.is_leaf() && node(n.left).is_leaf() && node(n.right).is_leaf()) out.push_back(i);
    }
    return out;
  }
  int internal_count() const {
    int c = 0;
    for (const auto& n : nodes_) c += n.alive && !n.is_leaf();
    return c;
  }
  int depth() const {
    int d = 0;
    for (const auto& n : nodes_)
      if (n.alive) d = std::max(d, n.depth);
    return d;
  }

  void grow(int leaf, int var, double cut) {
    const int l = allocate(), r = allocate();
    for (int c : {l, r}) {
      node(c) = Node{};
      node(c).parent = leaf;
      node(c).depth = node(leaf).depth + 1;
    }
    node(leaf).var = var;
    node(leaf).cut = cut;
    node(leaf).left = l;
    node(leaf).right = r;
  }

  void prune(int parent) {
    for (int c : {node(parent).left, node(parent).right}) {
      node(c).alive = false;
      free_.push_back(c);
    }
    node(parent).left = node(parent).right = -1;
    node(parent).var = -1;
  }

  nlohmann::json to_json(const std::vector<std::string>& names, double scale, double shift) const {
    return dump(0, names, scale, shift);
  }

 private:
  int allocate() {
    if (!free_.empty()) {
      const int i = free_.back();
      free_.pop_back();
      return i;
    }
    nodes_.push_back(Node{});
    return static_cast<int>(nodes_.size() - 1);
  }

  nlohmann::json dump(int i, const std::vector<std::string>& names, double scale, double shift) const {
    const auto& n = node(i);
    if (n.is_leaf()) return {{"leaf", n.mu * scale + shift}};
    const auto v = static_cast<std::size_t>(n.var);
    return {{"var", v < names.size() ? names[v] : std::to_string(v)},
            {"cut", n.cut},
            {"left", dump(n.left, names, scale, shift)},
            {"right", dump(n.right, names, scale, shift)}};
  }

  std::vector<Node> nodes_;
  std::vector<int> free_;
};

}  // namespace mpd::bart
