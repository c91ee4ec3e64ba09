"""OAR Cast - object-attribute-relation video coding and channel simulation"""

__version__ = "1.0.0"
__author__ = "OAR Cast Team"
