#pragma once

#include "fedshard/attack.hpp"
#include "fedshard/checkpoint.hpp"
#include "fedshard/config.hpp"
#include "fedshard/data.hpp"
#include "fedshard/error.hpp"
#include "fedshard/experiment.hpp"
#include "fedshard/federation.hpp"
#include "fedshard/loss.hpp"
#include "fedshard/metrics.hpp"
#include "fedshard/net.hpp"
#include "fedshard/ops.hpp"
#include "fedshard/params.hpp"
#include "fedshard/partition.hpp"
#include "fedshard/rng.hpp"
#include "fedshard/subnet.hpp"
#include "fedshard/surgery.hpp"
#include "fedshard/tensor.hpp"
#include "fedshard/train.hpp"
#include "fedshard/trigger.hpp"
