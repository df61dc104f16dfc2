#pragma once

#include "propseg/boundary.hpp"
#include "propseg/config.hpp"
#include "propseg/error.hpp"
#include "propseg/hungarian.hpp"
#include "propseg/io.hpp"
#include "propseg/mask.hpp"
#include "propseg/metrics.hpp"
#include "propseg/parallel.hpp"
#include "propseg/postproc.hpp"
#include "propseg/render.hpp"
#include "propseg/synth.hpp"
