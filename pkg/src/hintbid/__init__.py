"""Hint-augmented bidding in repeated first-price auctions."""
