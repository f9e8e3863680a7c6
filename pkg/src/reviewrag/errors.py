class ReviewRagError(Exception):
    """Base class for all errors raised by this package."""


class DuplicateReviewId(ReviewRagError):
    pass


class EmptyIdentifier(ReviewRagError):
    pass


class IdCollision(ReviewRagError):
    """A user id and an item id share the same string within one graph."""


class UnknownId(ReviewRagError, KeyError):
    pass


class UnknownUser(UnknownId):
    pass


class GraphFrozen(ReviewRagError):
    pass


class InvalidConfig(ReviewRagError, ValueError):
    pass


class MissingField(ReviewRagError, ValueError):
    pass


class EmbedderFailure(ReviewRagError):
    def __init__(self, review_id, cause):
        self.review_id = review_id
        self.cause = cause
        super().__init__(f"embedding failed for {review_id!r}: {cause}")


class TemplateMismatch(ReviewRagError, ValueError):
    pass


class EmptyAfterExclusion(ReviewRagError, ValueError):
    pass


class UnreadableInput(ReviewRagError, OSError):
    pass


class EmptySchemaMap(ReviewRagError, ValueError):
    pass


class InfeasibleSizes(ReviewRagError, ValueError):
    pass


class UnknownSplit(ReviewRagError, KeyError):
    pass


class MismatchedReports(ReviewRagError, ValueError):
    pass


# Generation errors. These are recorded per sample by the batch API.

class GenerationError(ReviewRagError):
    pass


class RateLimited(GenerationError):
    pass


class ServiceError(GenerationError):
    def __init__(self, status, message=""):
        self.status = status
        super().__init__(f"service returned HTTP {status}" + (f": {message}" if message else ""))


class GenerationTimeout(GenerationError):
    pass
