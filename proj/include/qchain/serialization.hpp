#ifndef QCHAIN_SERIALIZATION_HPP_
#define QCHAIN_SERIALIZATION_HPP_

#include <json.hpp>
#include <string>

#include "qchain/moments.hpp"

namespace qchain {

using Json = nlohmann::json;

Json to_json(const DiscreteMeasure<double> &m);
Json to_json(const TransitionKernel<double> &k);
Json to_json(const QuadraticFit<double> &fit);
Json to_json(const LinearFit<double> &fit);
Json to_json(const ConstraintReport<double> &report);
Json to_json(const VarianceClass<double> &vc);
Json to_json(const IdentityCheck<double> &check);
Json to_json(const MomentBoundReport<double> &report);

/// Short stable identifier, e.g. "mehler(q=0.5,r=0.6,n_nodes=32)".
std::string kernel_id(const TransitionKernel<double> &k);

}  // namespace qchain

#endif  // QCHAIN_SERIALIZATION_HPP_
