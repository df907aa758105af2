#pragma once

#include "tafilter/checkpoint.hpp"
#include "tafilter/data.hpp"
#include "tafilter/filterbank.hpp"
#include "tafilter/inspect.hpp"
#include "tafilter/model.hpp"
#include "tafilter/pooling.hpp"
#include "tafilter/train.hpp"
