import { describe, expect, it } from 'vitest';

import { QueryResponse, RankedItem } from '../src/api.js';
import {
  LIST_CAPS,
  escapeHtml,
  highlightTerms,
  renderApp,
  renderColumn,
  renderColumns,
  renderItem,
  renderSnippets,
} from '../src/render.js';
import { ViewState, initialState } from '../src/state.js';

function item(id: number, p: number, sentences: Array<[string, number]> = []): RankedItem {
  return {
    article_id: id,
    title: `Article ${id} headline.`,
    p,
    rel: 0.9,
    beta: 0.5,
    key_sentences: sentences.map(([text, similarity]) => ({ text, similarity })),
  };
}

/** A mocked service response, larger than the caps on every list. */
function mockedResponse(): QueryResponse {
  return {
    agree: [item(1, 0.9), item(2, 0.8), item(3, 0.7), item(4, 0.6)],
    disagree: [],
    discuss: [item(10, 0.95), item(11, 0.9), item(12, 0.85), item(13, 0.8), item(14, 0.75), item(15, 0.7)],
    timing_ms: 42,
  };
}

describe('three-column layout', () => {
  it('renders all three labeled columns', () => {
    const html = renderColumns(mockedResponse(), 'test question');
    expect(html).toContain('data-column="agree"');
    expect(html).toContain('data-column="disagree"');
    expect(html).toContain('data-column="discuss"');
  });

  it('caps lists at (3, 3, 5)', () => {
    expect(LIST_CAPS).toEqual({ agree: 3, disagree: 3, discuss: 5 });
    const html = renderColumns(mockedResponse(), 'test question');
    const agree = html.match(/data-column="agree".*?<\/section>/s)![0];
    const discuss = html.match(/data-column="discuss".*?<\/section>/s)![0];
    expect(agree.match(/<article/g)).toHaveLength(3);
    expect(discuss.match(/<article/g)).toHaveLength(5);
  });

  it('shows an explicit empty state for a category with no results', () => {
    const html = renderColumns(mockedResponse(), 'test question');
    const disagree = html.match(/data-column="disagree".*?<\/section>/s)![0];
    expect(disagree).toContain('empty-state');
    expect(disagree).toContain('no articles in this category');
    expect(disagree).not.toContain('<article');
  });

  it('preserves server list order without re-sorting', () => {
    // Deliberately not sorted by p: the server ranking is authoritative.
    const response: QueryResponse = {
      agree: [item(5, 0.2), item(6, 0.9), item(7, 0.5)],
      disagree: [],
      discuss: [],
      timing_ms: 1,
    };
    const html = renderColumn('agree', response.agree, []);
    const positions = [5, 6, 7].map((id) => html.indexOf(`data-article-id="${id}"`));
    expect(positions.every((v) => v >= 0)).toBe(true);
    expect([...positions].sort((a, b) => a - b)).toEqual(positions);
  });
});

describe('snippets', () => {
  it('renders key sentences in server-provided order with similarities', () => {
    const ranked = item(1, 0.9, [
      ['Third most similar sentence.', 0.41],
      ['Most similar sentence.', 0.93],
      ['Second sentence.', 0.87],
    ]);
    const html = renderSnippets(ranked, []);
    const first = html.indexOf('Third most similar');
    const second = html.indexOf('Most similar sentence');
    const third = html.indexOf('Second sentence');
    expect(first).toBeGreaterThanOrEqual(0);
    expect(first).toBeLessThan(second);
    expect(second).toBeLessThan(third);
    expect(html).toContain('0.410');
    expect(html).toContain('0.930');
  });

  it('renders an empty block for zero sentences', () => {
    expect(renderSnippets(item(1, 0.5), [])).toBe('<ul class="snippets"></ul>');
  });

  it('renders one row per sentence', () => {
    const html = renderSnippets(item(1, 0.5, [['a one', 0.3], ['b two', 0.2], ['c three', 0.1]]), []);
    expect(html.match(/<li/g)).toHaveLength(3);
  });

  it('emphasizes question terms', () => {
    const ranked = item(1, 0.9, [['Robert Plant cancelled the tour.', 0.8]]);
    const html = renderSnippets(ranked, highlightTerms('Did Robert Plant cancel the tour'));
    expect(html).toContain('<mark>Robert</mark>');
    expect(html).toContain('<mark>Plant</mark>');
    expect(html).toContain('<mark>tour</mark>');
  });

  it('escapes article text', () => {
    const ranked = item(1, 0.9, [['<script>alert(1)</script>', 0.5]]);
    const html = renderSnippets(ranked, []);
    expect(html).not.toContain('<script>');
    expect(html).toContain('&lt;script&gt;');
  });
});

describe('app shell', () => {
  it('shows the error banner while retaining previous results', () => {
    const state: ViewState = {
      ...initialState,
      question: 'q',
      error: 'service unavailable',
      result: mockedResponse(),
    };
    const html = renderApp(state);
    expect(html).toContain('error-banner');
    expect(html).toContain('service unavailable');
    expect(html).toContain('data-column="agree"');
  });

  it('shows a loading marker', () => {
    const html = renderApp({ ...initialState, loading: true });
    expect(html).toContain('loading');
  });

  it('renders the drill-down panel only when an article is selected', () => {
    const without = renderApp({ ...initialState, result: mockedResponse(), question: 'q' });
    expect(without).not.toContain('article-panel');
    const withPanel = renderApp({
      ...initialState,
      result: mockedResponse(),
      question: 'q',
      article: { article_id: 7, text: 'One. Two.', sentences: ['One.', 'Two.'] },
    });
    expect(withPanel).toContain('article-panel');
    expect(withPanel).toContain('data-article-id="7"');
    expect(withPanel).toContain('<p>One.</p><p>Two.</p>');
  });

  it('is a pure function of state', () => {
    const state: ViewState = { ...initialState, result: mockedResponse(), question: 'stable' };
    expect(renderApp(state)).toBe(renderApp(state));
  });
});

describe('escapeHtml', () => {
  it('neutralizes markup characters', () => {
    expect(escapeHtml(`<a href="x">'&'</a>`)).toBe(
      '&lt;a href=&quot;x&quot;&gt;&#39;&amp;&#39;&lt;/a&gt;',
    );
  });
});
