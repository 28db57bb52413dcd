#pragma once

#include "cantorlab/analysis.hpp"
#include "cantorlab/cantor.hpp"
#include "cantorlab/error.hpp"
#include "cantorlab/fields.hpp"
#include "cantorlab/geometry.hpp"
#include "cantorlab/io.hpp"
#include "cantorlab/metric.hpp"
#include "cantorlab/pencils.hpp"
#include "cantorlab/qcmap.hpp"
#include "cantorlab/rng.hpp"
#include "cantorlab/space.hpp"
#include "cantorlab/svg.hpp"
