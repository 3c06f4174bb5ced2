#pragma once

#include "decnn/campaign.hpp"
#include "decnn/dataset_io.hpp"
#include "decnn/de_engine.hpp"
#include "decnn/fitness.hpp"
#include "decnn/ip_encoding.hpp"
#include "decnn/micro_cnn.hpp"
#include "decnn/stats.hpp"
#include "decnn/types.hpp"
