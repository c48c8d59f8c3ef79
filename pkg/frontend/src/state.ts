/** View state and the controller driving it.
 *
 * One query may be in flight at a time: each submission gets a monotonically
 * increasing id and responses from superseded submissions are dropped, so a
 * slow old answer can never overwrite a newer one. Errors keep the previous
 * results on screen.
 */

import { ApiClient, ArticleDetail, QueryResponse } from './api.js';

export interface ViewState {
  question: string;
  loading: boolean;
  error: string | null;
  result: QueryResponse | null;
  article: ArticleDetail | null;
}

export const initialState: ViewState = {
  question: '',
  loading: false,
  error: null,
  result: null,
  article: null,
};

export interface QueryPort {
  query(question: string, signal?: AbortSignal): Promise<QueryResponse>;
  article(articleId: number, signal?: AbortSignal): Promise<ArticleDetail>;
}

export class Controller {
  private state: ViewState = { ...initialState };
  private querySeq = 0;
  private abort: AbortController | null = null;

  constructor(
    private readonly client: QueryPort | ApiClient,
    private readonly onChange: (state: ViewState) => void,
  ) {}

  current(): ViewState {
    return this.state;
  }

  private apply(patch: Partial<ViewState>): void {
    this.state = { ...this.state, ...patch };
    this.onChange(this.state);
  }

  async submitQuestion(text: string): Promise<void> {
    const question = text.trim();
    if (!question) return;
    const ticket = ++this.querySeq;
    this.abort?.abort();
    this.abort = typeof AbortController !== 'undefined' ? new AbortController() : null;
    this.apply({ question, loading: true, error: null, article: null });
    try {
      const result = await this.client.query(question, this.abort?.signal);
      if (ticket !== this.querySeq) return; // a newer submission took over
      this.apply({ loading: false, result });
    } catch (err) {
      if (ticket !== this.querySeq) return;
      const message = err instanceof Error ? err.message : 'request failed';
      // Previous results stay on screen under the error banner.
      this.apply({ loading: false, error: message });
    }
  }

  async openArticle(articleId: number): Promise<void> {
    try {
      const article = await this.client.article(articleId);
      this.apply({ article });
    } catch (err) {
      const message = err instanceof Error ? err.message : 'request failed';
      this.apply({ error: message });
    }
  }

  closeArticle(): void {
    this.apply({ article: null });
  }
}
