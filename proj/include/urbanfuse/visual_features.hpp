#pragma once

#include <string>

#include "urbanfuse/core.hpp"
#include "urbanfuse/ingest.hpp"

namespace urbanfuse {

/// 2048 activation columns plus a has_image flag. Reports without an image
/// get zeros. An image_ref missing from the table is an alignment error.
FeatureBlock visual_block(const Dataset& dataset, const VisualTable& table, std::string name = "image");

}  // namespace urbanfuse
