from .generic__shell import *
