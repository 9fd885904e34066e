from typing import Optional

from pydantic import BaseModel, Field

from facedyn.schemas.stats import ChiSquareResult


class HumanRating(BaseModel):
    participant_id: str
    video_id: str
    rating: float = Field(..., ge=0, le=100)  # 0 = Real, 100 = Fake


class ConsensusVote(BaseModel):
    judgment: str
    fake_votes: int
    real_votes: int
    tie: bool = False


class ConsensusJudgment(BaseModel):
    votes: dict[str, ConsensusVote]

    def judgments(self) -> dict[str, str]:
        return {vid: v.judgment for vid, v in self.votes.items()}


class AgreementReport(BaseModel):
    stratum: str
    row_labels: list[str]
    col_labels: list[str]
    contingency: list[list[int]]
    n: int
    agreement_rate: float
    chi_square: Optional[ChiSquareResult] = None


class OutcomeGroupSummary(BaseModel):
    feature: str
    group: str
    n: int
    mean: Optional[float]
    se: Optional[float]
