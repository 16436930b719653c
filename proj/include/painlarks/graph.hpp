#pragma once

// The 68-point facial landmark graph and its normalized adjacency.

#include <string>
#include <utility>
#include <vector>

#include "painlarks/tensor.hpp"

namespace painlarks {

using EdgeList = std::vector<std::pair<int, int>>;

// Immutable after construction; safe to share across threads.
struct FacialGraph {
  int num_nodes = 0;
  // Undirected edges, stored once each with first < second, sorted.
  EdgeList edges;
  // D^(-1/2) (A + I) D^(-1/2), with D the degree matrix of A + I.
  Tensor adjacency_norm;
};

// Canonical 68-landmark topology: nine anatomical groups (jaw, two brows,
// nose bridge, lower nose, two eye loops, two lip loops), 67 edges.
EdgeList canonical_facial_edges();

FacialGraph build_facial_graph(int num_nodes, EdgeList edges);
FacialGraph build_facial_adjacency();  // canonical 68-node graph

Tensor normalize_adjacency(int num_nodes, const EdgeList& edges);

// One "i j" pair per line, 0-based, '#' starts a comment.
EdgeList load_edge_list(const std::string& path);

std::vector<int> node_degrees(int num_nodes, const EdgeList& edges);
int count_components(int num_nodes, const EdgeList& edges);

}  // namespace painlarks
