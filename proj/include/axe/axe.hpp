#pragma once

#include "axe/alphabet.hpp"
#include "axe/bounds.hpp"
#include "axe/constraint.hpp"
#include "axe/error.hpp"
#include "axe/gpfq.hpp"
#include "axe/optq.hpp"
#include "axe/oracle.hpp"
#include "axe/pipeline.hpp"
#include "axe/projection.hpp"
#include "axe/quantizer.hpp"
#include "axe/serialization.hpp"
#include "axe/tensor_io.hpp"
#include "axe/types.hpp"
