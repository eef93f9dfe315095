#pragma once

#include "cellq/cli.hpp"
#include "cellq/islip.hpp"
#include "cellq/mg1.hpp"
#include "cellq/quantize.hpp"
#include "cellq/segmenter.hpp"
#include "cellq/simcore.hpp"
#include "cellq/traffic.hpp"
