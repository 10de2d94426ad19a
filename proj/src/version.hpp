#pragma once

#define RATNMT_VERSION "0.1.0"
