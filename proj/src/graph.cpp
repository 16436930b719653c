#include "painlarks/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace painlarks {

namespace {

void add_chain(EdgeList& edges, int from, int to) {
  for (int i = from; i < to; ++i) edges.emplace_back(i, i + 1);
}

void add_loop(EdgeList& edges, int from, int to) {
  add_chain(edges, from, to);
  edges.emplace_back(from, to);
}

EdgeList canonicalize(int num_nodes, EdgeList edges) {
  for (auto& e : edges) {
    if (e.first < 0 || e.first >= num_nodes || e.second < 0 || e.second >= num_nodes) {
      throw DataError("edge (" + std::to_string(e.first) + "," + std::to_string(e.second) +
                      ") out of range for " + std::to_string(num_nodes) + " nodes");
    }
    if (e.first == e.second) {
      throw DataError("self-loop on node " + std::to_string(e.first) +
                      " not allowed in an edge list");
    }
    if (e.first > e.second) std::swap(e.first, e.second);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

}  // namespace

EdgeList canonical_facial_edges() {
  EdgeList edges;
  add_chain(edges, 0, 16);    // jaw
  add_chain(edges, 17, 21);   // right brow
  add_chain(edges, 22, 26);   // left brow
  add_chain(edges, 27, 30);   // nose bridge
  add_chain(edges, 31, 35);   // lower nose
  add_loop(edges, 36, 41);    // right eye
  add_loop(edges, 42, 47);    // left eye
  add_loop(edges, 48, 59);    // outer lip
  add_loop(edges, 60, 67);    // inner lip ring
  // Inner-lip closure: corners joined across the slit, upper points joined to
  // the lower point directly beneath them.
  edges.emplace_back(60, 64);
  edges.emplace_back(61, 67);
  edges.emplace_back(62, 66);
  edges.emplace_back(63, 65);
  return canonicalize(68, std::move(edges));
}

Tensor normalize_adjacency(int num_nodes, const EdgeList& edges) {
  if (num_nodes <= 0) throw DataError("normalize_adjacency: need at least one node");
  EdgeList canon = canonicalize(num_nodes, edges);
  Tensor a = Tensor::zeros({num_nodes, num_nodes});
  for (int i = 0; i < num_nodes; ++i) a.at({i, i}) = 1.0;  // A + I
  for (const auto& [i, j] : canon) {
    a.at({i, j}) = 1.0;
    a.at({j, i}) = 1.0;
  }
  std::vector<double> inv_sqrt_deg(static_cast<size_t>(num_nodes));
  for (int i = 0; i < num_nodes; ++i) {
    double deg = 0;
    for (int j = 0; j < num_nodes; ++j) deg += a.at({i, j});
    inv_sqrt_deg[static_cast<size_t>(i)] = 1.0 / std::sqrt(deg);
  }
  for (int i = 0; i < num_nodes; ++i) {
    for (int j = 0; j < num_nodes; ++j) {
      a.at({i, j}) *= inv_sqrt_deg[static_cast<size_t>(i)] * inv_sqrt_deg[static_cast<size_t>(j)];
    }
  }
  return a;
}

FacialGraph build_facial_graph(int num_nodes, EdgeList edges) {
  FacialGraph g;
  g.num_nodes = num_nodes;
  g.edges = canonicalize(num_nodes, std::move(edges));
  g.adjacency_norm = normalize_adjacency(num_nodes, g.edges);
  return g;
}

FacialGraph build_facial_adjacency() {
  return build_facial_graph(68, canonical_facial_edges());
}

EdgeList load_edge_list(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot read edge list " + path);
  EdgeList edges;
  std::string line;
  long lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    int i, j;
    if (ls >> i) {
      if (!(ls >> j)) throw DataError("edge list " + path + ": expected two node indices", lineno);
      std::string rest;
      if (ls >> rest) throw DataError("edge list " + path + ": trailing tokens", lineno);
      edges.emplace_back(i, j);
    }
  }
  return edges;
}

std::vector<int> node_degrees(int num_nodes, const EdgeList& edges) {
  std::vector<int> deg(static_cast<size_t>(num_nodes), 0);
  for (const auto& [i, j] : edges) {
    ++deg[static_cast<size_t>(i)];
    ++deg[static_cast<size_t>(j)];
  }
  return deg;
}

int count_components(int num_nodes, const EdgeList& edges) {
  std::vector<int> parent(static_cast<size_t>(num_nodes));
  for (int i = 0; i < num_nodes; ++i) parent[static_cast<size_t>(i)] = i;
  std::function<int(int)> find = [&](int x) {
    while (parent[static_cast<size_t>(x)] != x) {
      parent[static_cast<size_t>(x)] = parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
      x = parent[static_cast<size_t>(x)];
    }
    return x;
  };
  for (const auto& [i, j] : edges) {
    const int ri = find(i), rj = find(j);
    if (ri != rj) parent[static_cast<size_t>(ri)] = rj;
  }
  std::set<int> roots;
  for (int i = 0; i < num_nodes; ++i) roots.insert(find(i));
  return static_cast<int>(roots.size());
}

}  // namespace painlarks
