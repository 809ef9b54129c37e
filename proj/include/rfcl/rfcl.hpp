#pragma once

#include "rfcl/clustering.hpp"
#include "rfcl/config.hpp"
#include "rfcl/data.hpp"
#include "rfcl/experiment.hpp"
#include "rfcl/filter_bank.hpp"
#include "rfcl/inspect.hpp"
#include "rfcl/mlp.hpp"
#include "rfcl/network.hpp"
#include "rfcl/receptive_fields.hpp"
#include "rfcl/tensor.hpp"
#include "rfcl/visualize.hpp"
