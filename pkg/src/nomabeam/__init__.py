# The version is in the format `major.minor.patch`. Model files carry the version
# which wrote them. Guidelines when bumping:
# - fixes which do not change the layout of model or dataset files only bump the
#   patch number;
# - changes to the layer stack, the label layout or the document schemas MUST bump
#   at least the minor number. Model files written by another major.minor are
#   refused when loading.
__version__ = "0.9.0"
