#pragma once

#include <filesystem>
#include <vector>

#include "flowmorph/flow/model.hpp"
#include "flowmorph/geometry/mesh.hpp"
#include "flowmorph/ode/integrate.hpp"

namespace fm::canonical {

using flow::FlowModel;
using flow::Vec;
using numerics::Mat;

// Vertices advected from code z to the hub; connectivity unchanged.
geometry::Mesh canonicalize(const FlowModel& model, const geometry::Mesh& mesh, const Vec& z, const ode::OdeConfig& cfg);

// For each vertex of the source, the matched target vertex and the distance
// between them in the space where matching happened.
struct Correspondence {
  std::vector<int> target;
  std::vector<double> distance;

  std::size_t size() const { return target.size(); }
};

// Exact nearest row of `to` for every row of `from`; ties go to the lowest index.
Correspondence match_points(const Mat& from, const Mat& to);

// Nearest neighbour between both shapes after canonicalizing each with its own code.
Correspondence correspond(const FlowModel& model, const geometry::Mesh& xi, const Vec& zi, const geometry::Mesh& xj,
                          const Vec& zj, const ode::OdeConfig& cfg);

// Nearest neighbour in the original frame.
Correspondence naive_correspond(const geometry::Mesh& xi, const geometry::Mesh& xj);

struct SmsReport {
  double score = 0.0;  // mean of the two directions
  double forward = 0.0;
  double backward = 0.0;
  std::size_t matched = 0;  // pairs counted over both directions
};

// Semantic matching score: label agreement rate of each correspondence, averaged.
SmsReport sms(const geometry::Mesh& xi, const geometry::Mesh& xj, const Correspondence& fwd, const Correspondence& bwd);

// CSV with columns source,target,distance.
void save_correspondence_csv(const Correspondence& c, const std::filesystem::path& path);

}  // namespace fm::canonical
