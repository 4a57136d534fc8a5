#pragma once

#include "triage/classifier/config.hpp"
#include "triage/classifier/loss.hpp"
#include "triage/classifier/model.hpp"
#include "triage/classifier/network.hpp"
#include "triage/classifier/serialize.hpp"
#include "triage/classifier/train.hpp"
