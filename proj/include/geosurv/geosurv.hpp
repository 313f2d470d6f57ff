#pragma once

#include "geosurv/core.hpp"
#include "geosurv/csv.hpp"
#include "geosurv/geo.hpp"
#include "geosurv/model.hpp"
#include "geosurv/pipeline.hpp"
#include "geosurv/spectral.hpp"
#include "geosurv/survival.hpp"
