NAME = "ibca"
VERSION = "0.3.0"
