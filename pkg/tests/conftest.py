from tagreuse.testing import *
