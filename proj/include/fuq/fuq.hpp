#pragma once

#include "fuq/config.hpp"
#include "fuq/error.hpp"
#include "fuq/field.hpp"
#include "fuq/flow.hpp"
#include "fuq/io.hpp"
#include "fuq/metrics.hpp"
#include "fuq/model.hpp"
#include "fuq/network.hpp"
#include "fuq/optim.hpp"
#include "fuq/parallel.hpp"
#include "fuq/random.hpp"
#include "fuq/training.hpp"
#include "fuq/uq.hpp"
