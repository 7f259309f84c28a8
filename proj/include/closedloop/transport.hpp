#pragma once

#include <functional>
#include <vector>

namespace closedloop {

/// Exact optimal cost of the balanced transportation problem
///   min Σ f_ij cost(i,j)  s.t.  Σ_j f_ij = supply_i, Σ_i f_ij = demand_j, f ≥ 0,
/// solved as min-cost flow by successive shortest paths with node potentials.
/// Supplies and demands must be nonnegative and sum to the same total
/// (probability weights at desk scale). Costs must be nonnegative.
double transport_cost(const std::vector<double>& supply, const std::vector<double>& demand,
                      const std::function<double(std::size_t, std::size_t)>& cost);

}  // namespace closedloop
